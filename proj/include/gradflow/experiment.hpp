#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gradflow/certificates.hpp"
#include "gradflow/closed_loop.hpp"
#include "gradflow/cost_model.hpp"
#include "gradflow/lti_plant.hpp"

namespace gradflow {

struct TailConfig {
  std::string basis = "sine";
  Vector coefficients;
};

struct TermLearningConfig {
  bool enabled = false;
  EstimatorOptions estimator;
  double noise_std = 0.0;
  std::vector<Vector> seed_points;
};

struct DisturbanceConfig {
  std::string kind = "constant";  // constant | sinusoidal | piecewise-linear
  Vector offset;
  Vector amplitude;
  double omega = 0.0;
  double phase = 0.0;
  std::vector<double> times;
  std::vector<Vector> values;
};

/// Fully explicit experiment description; presets are expanded before this
/// is filled in.
struct ExperimentConfig {
  // plant
  Matrix a, b, c, d, e;
  Matrix lyapunov_weight;  // Q
  // cost: φ(u) = ½uᵀΥu + υᵀu + r, ψ(y) = ½‖y − ξ‖²
  Matrix curvature;
  Vector linear;
  double offset = 0.0;
  Vector target;
  std::optional<TailConfig> phi_tail;
  std::optional<TailConfig> psi_tail;
  // learning
  TermLearningConfig phi_learning;
  TermLearningConfig psi_learning;
  // simulation
  double eta = 0.1;
  double s = 0.5;
  double step = 1e-3;
  double horizon = 80.0;
  double phi_rate = 0.25;
  double psi_rate = 0.0;
  std::uint64_t seed = 1;
  Vector x0;
  Vector u0;
  DisturbanceConfig disturbance;
  // output
  std::string out_dir = "out";
  std::string csv_name = "trajectory.csv";
  std::string report_name = "report.txt";
  int log_every = 10;
  RestartPolicy restart_policy = RestartPolicy::per_arrival;
  std::vector<double> sweep_eta;
};

/// Names accepted by the "preset" key.
std::vector<std::string> preset_names();

/// Parses and validates; every problem found is reported in one config error.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
ExperimentConfig preset_config(const std::string& name);
/// Explicit JSON form; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const ExperimentConfig& config);

/// Objects built from a config.
struct Experiment {
  PlantModel plant;
  LyapunovCertificate lyapunov;
  CompositeCost cost;
  SmoothnessConstants smoothness;
  std::optional<Certificate> certificate;  // absent when η = 0
  SimulationConfig simulation;
  DisturbanceSignal disturbance;
};

Experiment build_experiment(const ExperimentConfig& config);

enum class Verdict { pass, fail, inconclusive };
const char* to_string(Verdict verdict);

struct RunReport {
  Verdict verdict = Verdict::inconclusive;
  std::optional<Certificate> certificate;
  /// Learning-error level (ε or ε′) with exact estimates, i.e. the floor
  /// set by truncation alone.
  std::optional<EpsilonCheck> floor_epsilon;
  bool gain_ok = false;
  double max_violation = 0.0;  // max of ‖z‖ − bound over samples with a bound
  bool bound_available = false;
  double certified_fraction = 0.0;
  std::size_t phi_arrivals = 0;
  std::size_t psi_arrivals = 0;
  std::size_t bound_steps_checked = 0;
  std::size_t bound_steps_down = 0;
  double final_z = 0.0;
  double initial_z = 0.0;
  std::optional<double> final_a;
  std::optional<double> iss;
  double final_phi_error = 0.0;
  double final_psi_error = 0.0;
  bool u_frozen = false;
  bool plant_settled = false;
  double wall_seconds = 0.0;
  RestartPolicy policy = RestartPolicy::per_arrival;
  double eta = 0.0;
};

struct RunResult {
  ClosedLoopTrajectory trajectory;
  std::optional<BoundTrajectory> bound;
  DeltaSeries delta;
  RunReport report;
};

RunResult run_experiment(const ExperimentConfig& config);

/// Runs one experiment per entry of sweep_eta on worker threads. Each run
/// gets the seed base_seed + index.
std::vector<RunResult> run_sweep(const ExperimentConfig& config, unsigned threads = 0);

void write_report(std::ostream& out, const RunReport& report);

/// Conditions that can be checked before simulating.
struct CertifyReport {
  Certificate certificate;
  EpsilonCheck floor_epsilon;
  /// Fit from the recorded data alone, when φ learning is enabled.
  std::optional<EpsilonCheck> seed_epsilon;
  std::optional<double> seed_phi_error;
  double eta_max = 0.0;
  bool all_conditions = false;
};

CertifyReport certify(const ExperimentConfig& config);
void write_certify_report(std::ostream& out, const CertifyReport& report);

}  // namespace gradflow
