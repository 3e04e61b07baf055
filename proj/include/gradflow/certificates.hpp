#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gradflow/closed_loop.hpp"
#include "gradflow/cost_model.hpp"
#include "gradflow/lti_plant.hpp"

namespace gradflow {

/// θ = ℓ_y‖G‖‖C‖ / (ℓ_y‖G‖‖C‖ + 2‖PA⁻¹B‖)
double compute_theta(double ell_y, double g_norm, double c_norm, double pab_norm);

/// Largest admissible gain: η < (1−s)² λ_min(Q) / ((2−s)·2‖PA⁻¹B‖ ℓ_y‖G‖‖C‖)
double gain_bound(double s, double lambda_min_q, double pab_norm, double ell_y, double g_norm, double c_norm);
inline bool check_gain(double eta, double eta_max) { return eta > 0.0 && eta < eta_max; }

/// Everything the constants depend on.
struct CertificateInputs {
  double s = 0.5;
  double eta = 0.0;
  double lambda_min_q = 0.0;
  double lambda_min_p = 0.0;
  double lambda_max_p = 0.0;
  double pab_norm = 0.0;  // ‖P A⁻¹ B‖
  double pae_norm = 0.0;  // ‖Pᵀ A⁻¹ E‖
  double g_norm = 0.0;
  double c_norm = 0.0;
  SmoothnessConstants smooth;
};

CertificateInputs make_certificate_inputs(const PlantModel& plant, const LyapunovCertificate& lyap,
                                          const SmoothnessConstants& smooth, double eta, double s);

struct Certificate {
  CertificateInputs inputs;
  double theta = 0.0;
  double eta_max = 0.0;
  bool gain_ok = false;
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
  double kappa1 = 0, kappa2 = 0, kappa3 = 0;
  /// c₀ / c₃, the admissible learning-error level.
  double epsilon_threshold = 0.0;
};

Certificate compute_constants(const CertificateInputs& inputs);

struct EpsilonCheck {
  double epsilon = 0.0;
  /// ε < c₀/c₃. ε = 0 counts as satisfied (exact knowledge) and is flagged.
  bool satisfied = false;
  bool boundary = false;
  double a = 0.0;  // c₀ − ε c₃
};

/// ε = ℓ_uᴺ sup‖α−α̂‖ + ℓ_yᴹ‖G‖² sup‖ρ−ρ̂‖, plus ℓ_uᵉ + ℓ_yᵉ‖G‖² when the cost is
/// truncated.
EpsilonCheck epsilon_condition(double sup_alpha_error, double sup_rho_error, const Certificate& cert);

/// Δ (or Ξ with truncation tails) at each sample, for the estimates in force
/// from the sample on and for the ones in force just before it.
struct DeltaSeries {
  std::vector<double> value;
  std::vector<double> left;
};

DeltaSeries delta_signal(const ClosedLoopTrajectory& trajectory, const CompositeCost& cost);

enum class RestartPolicy { per_arrival, global };

const char* to_string(RestartPolicy policy);
RestartPolicy parse_restart_policy(const std::string& name);

struct BoundInterval {
  std::size_t first = 0;  // sample indices, inclusive
  std::size_t last = 0;
  double epsilon = 0.0;
  double a = 0.0;
  bool valid = false;
  std::string reason;  // why the bound is absent, empty when valid
  /// Bound value at the closing sample using this interval's anchor and the
  /// estimates in force before that sample.
  std::optional<double> left_limit;
};

struct BoundTrajectory {
  std::vector<double> times;
  std::vector<std::optional<double>> values;
  std::vector<BoundInterval> intervals;
};

/// κ₁e^{−a(t−t₀)/2}‖z(t₀)‖ + κ₂∫e^{−a(t−τ)/2}Δ(τ)dτ + κ₃∫e^{−a(t−τ)/2}‖ẇ_τ‖dτ.
/// Per-arrival restarts re-anchor at every arrival with the estimates of that
/// interval; the global policy keeps t₀ = 0 and uses the running sup error.
/// The integrals use the exact exponential-kernel recursion for linearly
/// interpolated integrands.
BoundTrajectory evaluate_bound(const ClosedLoopTrajectory& trajectory, const Certificate& cert,
                               const CompositeCost& cost, const DeltaSeries& delta, RestartPolicy policy);

/// ∫₀^dt e^{−c(dt−s)} f(s) ds for f linear from f0 to f1.
double exponential_increment(double c, double dt, double f0, double f1);

/// 2/a·(κ₂ sup Δ + κ₃ sup‖ẇ‖)
double iss_asymptote(const Certificate& cert, double a, double sup_delta, double sup_wdot);

}  // namespace gradflow
