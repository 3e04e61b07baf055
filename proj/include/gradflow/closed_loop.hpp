#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradflow/cost_model.hpp"
#include "gradflow/learning.hpp"
#include "gradflow/lti_plant.hpp"

namespace gradflow {

enum class DisturbanceKind { constant, sinusoidal, piecewise_linear };

/// w(t) with an analytic derivative. Piecewise-linear signals hold their end
/// values outside the knot range and use the right derivative at knots.
class DisturbanceSignal {
 public:
  static DisturbanceSignal constant(Vector value);
  /// w_i(t) = offset_i + amplitude_i sin(ω t + phase)
  static DisturbanceSignal sinusoidal(Vector offset, Vector amplitude, double omega, double phase = 0.0);
  /// values: one column per knot time (strictly increasing).
  static DisturbanceSignal piecewise_linear(std::vector<double> times, Matrix values);

  DisturbanceKind kind() const { return kind_; }
  Eigen::Index dim() const { return offset_.size(); }
  Vector value(double t) const;
  Vector rate(double t) const;

  const Vector& offset() const { return offset_; }
  const Vector& amplitude() const { return amplitude_; }
  double omega() const { return omega_; }
  double phase() const { return phase_; }
  const std::vector<double>& knot_times() const { return times_; }
  const Matrix& knot_values() const { return values_; }

 private:
  DisturbanceKind kind_ = DisturbanceKind::constant;
  Vector offset_;
  Vector amplitude_;
  double omega_ = 0.0;
  double phase_ = 0.0;
  std::vector<double> times_;
  Matrix values_;
};

struct SimulationConfig {
  double eta = 0.1;
  double step = 1e-3;
  double horizon = 80.0;
  double phi_rate = 0.25;
  double psi_rate = 0.0;
  double phi_noise = 0.0;
  double psi_noise = 0.0;
  std::uint64_t seed = 1;
  Vector x0;
  Vector u0;
  /// Log every k-th grid point (arrival times are always logged).
  int log_every = 10;
  /// When a term is not learned the controller uses its true coefficients.
  bool learn_phi = true;
  bool learn_psi = false;
  EstimatorOptions phi_estimator;
  EstimatorOptions psi_estimator;
  /// Recorded data: points where φ (resp. ψ) is evaluated before t = 0.
  std::vector<Vector> phi_seed_points;
  std::vector<Vector> psi_seed_points;
};

/// Bits of TrajectorySample::event.
inline constexpr int kPhiArrival = 1;
inline constexpr int kPsiArrival = 2;

struct TrajectorySample {
  double t = 0.0;
  Vector x, u, y, w, w_rate;
  Vector u_star, x_star;
  int event = 0;
  /// Estimates in force from t on, and just before t (differ only at arrivals).
  std::size_t phi_index = 0, psi_index = 0;
  std::size_t phi_index_before = 0, psi_index_before = 0;

  double u_error() const { return (u - u_star).norm(); }
  double x_error() const { return (x - x_star).norm(); }
  /// ‖z‖ with z = (u − u*, x − x*)
  double z_norm() const { return std::hypot(u_error(), x_error()); }
};

struct ClosedLoopTrajectory {
  std::vector<TrajectorySample> samples;
  std::vector<ParameterEstimate> phi_estimates;
  std::vector<ParameterEstimate> psi_estimates;
  std::vector<double> phi_arrivals;
  std::vector<double> psi_arrivals;
};

/// u̇ = −η(∇b(u)ᵀα̂ + Gᵀ∇d(y)ᵀρ̂)
Vector controller_rhs(const Vector& u, const Vector& y, const Vector& alpha_hat, const Vector& rho_hat,
                      double eta, const BasisSet& phi_basis, const BasisSet& psi_basis, const Matrix& g);

using VectorField = std::function<Vector(double, const Vector&)>;

/// Classical fourth-order Runge-Kutta step. Throws a divergence error when the
/// result is not finite.
Vector rk4_step(const VectorField& f, double t, const Vector& state, double h);

/// Sorted Poisson arrival times in (0, horizon] with exponential gaps of mean
/// 1/rate.
std::vector<double> sample_arrivals(double rate, double horizon, std::uint64_t seed);

/// Runs the data-driven gradient-flow controller on the plant.
ClosedLoopTrajectory run_simulation(const PlantModel& plant, const CompositeCost& cost,
                                    const SimulationConfig& config, const DisturbanceSignal& disturbance);

/// Columns t, z_norm, u_err_norm, x_err_norm, bound, event, wdot_norm. The
/// bound cell is empty where no bound is available.
void write_trajectory_csv(std::ostream& out, const ClosedLoopTrajectory& trajectory,
                          const std::vector<std::optional<double>>& bound = {});

/// Shortest round-trip decimal representation.
std::string format_number(double value);

}  // namespace gradflow
