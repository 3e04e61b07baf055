#include "gradflow/closed_loop.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <random>

namespace gradflow {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct Node {
  double t = 0.0;
  bool log = false;
  int event = 0;
};

std::vector<Node> build_schedule(const SimulationConfig& config, const std::vector<double>& phi_arrivals,
                                 const std::vector<double>& psi_arrivals) {
  const double h = config.step;
  const long steps = std::max(1L, static_cast<long>(std::ceil(config.horizon / h - 1e-9)));
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(steps) + 1 + phi_arrivals.size() + psi_arrivals.size());
  for (long i = 0; i <= steps; ++i) {
    nodes.push_back({std::min(static_cast<double>(i) * h, config.horizon),
                     i % config.log_every == 0 || i == steps, 0});
  }
  auto place = [&](double t, int bit) {
    const long i = std::lround(t / h);
    if (i <= steps && std::abs(nodes[static_cast<std::size_t>(i)].t - t) <= 1e-9 * std::max(1.0, t)) {
      nodes[static_cast<std::size_t>(i)].event |= bit;
      nodes[static_cast<std::size_t>(i)].log = true;
    } else {
      nodes.push_back({t, true, bit});
    }
  };
  for (double t : phi_arrivals) place(t, kPhiArrival);
  for (double t : psi_arrivals) place(t, kPsiArrival);
  std::stable_sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.t < b.t; });
  // Two arrival streams can land on the same off-grid instant.
  std::vector<Node> merged;
  for (const Node& n : nodes) {
    if (!merged.empty() && n.t - merged.back().t <= 1e-12) {
      merged.back().event |= n.event;
      merged.back().log = merged.back().log || n.log;
    } else {
      merged.push_back(n);
    }
  }
  return merged;
}

}  // namespace

DisturbanceSignal DisturbanceSignal::constant(Vector value) {
  require(value.size() > 0, ErrorKind::dimension, "disturbance must be non-empty");
  DisturbanceSignal s;
  s.kind_ = DisturbanceKind::constant;
  s.amplitude_ = Vector::Zero(value.size());
  s.offset_ = std::move(value);
  return s;
}

DisturbanceSignal DisturbanceSignal::sinusoidal(Vector offset, Vector amplitude, double omega, double phase) {
  require(offset.size() > 0, ErrorKind::dimension, "disturbance must be non-empty");
  require_size(amplitude, offset.size(), "disturbance amplitude");
  require(std::isfinite(omega) && std::isfinite(phase), ErrorKind::precondition,
          "disturbance frequency and phase must be finite");
  DisturbanceSignal s;
  s.kind_ = DisturbanceKind::sinusoidal;
  s.offset_ = std::move(offset);
  s.amplitude_ = std::move(amplitude);
  s.omega_ = omega;
  s.phase_ = phase;
  return s;
}

DisturbanceSignal DisturbanceSignal::piecewise_linear(std::vector<double> times, Matrix values) {
  require(!times.empty(), ErrorKind::precondition, "piecewise-linear disturbance needs knots");
  require(values.cols() == static_cast<Eigen::Index>(times.size()) && values.rows() > 0, ErrorKind::dimension,
          "piecewise-linear disturbance needs one value column per knot");
  for (std::size_t i = 1; i < times.size(); ++i) {
    require(times[i] > times[i - 1], ErrorKind::precondition, "knot times must be strictly increasing");
  }
  DisturbanceSignal s;
  s.kind_ = DisturbanceKind::piecewise_linear;
  s.offset_ = values.col(0);
  s.amplitude_ = Vector::Zero(values.rows());
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  return s;
}

Vector DisturbanceSignal::value(double t) const {
  switch (kind_) {
    case DisturbanceKind::constant: return offset_;
    case DisturbanceKind::sinusoidal: return offset_ + amplitude_ * std::sin(omega_ * t + phase_);
    case DisturbanceKind::piecewise_linear: {
      if (t <= times_.front()) return values_.col(0);
      if (t >= times_.back()) return values_.col(values_.cols() - 1);
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const auto k = static_cast<Eigen::Index>(it - times_.begin());
      const double t0 = times_[static_cast<std::size_t>(k - 1)], t1 = times_[static_cast<std::size_t>(k)];
      const double lam = (t - t0) / (t1 - t0);
      return (1.0 - lam) * values_.col(k - 1) + lam * values_.col(k);
    }
  }
  return offset_;
}

Vector DisturbanceSignal::rate(double t) const {
  switch (kind_) {
    case DisturbanceKind::constant: return Vector::Zero(dim());
    case DisturbanceKind::sinusoidal: return amplitude_ * (omega_ * std::cos(omega_ * t + phase_));
    case DisturbanceKind::piecewise_linear: {
      if (t < times_.front() || t >= times_.back()) return Vector::Zero(dim());
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const auto k = static_cast<Eigen::Index>(it - times_.begin());
      const double t0 = times_[static_cast<std::size_t>(k - 1)], t1 = times_[static_cast<std::size_t>(k)];
      return (values_.col(k) - values_.col(k - 1)) / (t1 - t0);
    }
  }
  return Vector::Zero(dim());
}

Vector controller_rhs(const Vector& u, const Vector& y, const Vector& alpha_hat, const Vector& rho_hat,
                      double eta, const BasisSet& phi_basis, const BasisSet& psi_basis, const Matrix& g) {
  require_dims(g, psi_basis.dim(), phi_basis.dim(), "G");
  return -eta * (grad_phi_hat(phi_basis, alpha_hat, u) + g.transpose() * grad_psi_hat(psi_basis, rho_hat, y));
}

Vector rk4_step(const VectorField& f, double t, const Vector& state, double h) {
  require(h > 0.0, ErrorKind::precondition, "step size must be positive");
  const Vector k1 = f(t, state);
  const Vector k2 = f(t + 0.5 * h, state + 0.5 * h * k1);
  const Vector k3 = f(t + 0.5 * h, state + 0.5 * h * k2);
  const Vector k4 = f(t + h, state + h * k3);
  Vector next = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) {
    throw Error(ErrorKind::divergence, "state became non-finite at t = " + std::to_string(t + h));
  }
  return next;
}

std::vector<double> sample_arrivals(double rate, double horizon, std::uint64_t seed) {
  require(rate >= 0.0, ErrorKind::precondition, "arrival rate must be nonnegative");
  std::vector<double> times;
  if (rate == 0.0) return times;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  double t = gap(rng);
  while (t <= horizon) {
    times.push_back(t);
    t += gap(rng);
  }
  return times;
}

ClosedLoopTrajectory run_simulation(const PlantModel& plant, const CompositeCost& cost,
                                    const SimulationConfig& config, const DisturbanceSignal& disturbance) {
  require(config.eta >= 0.0, ErrorKind::precondition, "gain must be nonnegative");
  require(config.step > 0.0, ErrorKind::precondition, "step size must be positive");
  require(config.horizon >= config.step, ErrorKind::precondition, "horizon must be at least one step");
  require(config.log_every >= 1, ErrorKind::precondition, "log decimation must be at least 1");
  require(config.phi_noise >= 0.0 && config.psi_noise >= 0.0, ErrorKind::precondition,
          "noise levels must be nonnegative");
  require(cost.m() == plant.m() && cost.p() == plant.p() && cost.q() == plant.q(), ErrorKind::dimension,
          "cost and plant dimensions differ");
  require(disturbance.dim() == plant.q(), ErrorKind::dimension, "disturbance dimension differs from q");

  const SteadyStateMaps maps(plant);
  const Eigen::Index n = plant.n(), m = plant.m();
  const Vector x0 = config.x0.size() ? config.x0 : Vector(Vector::Zero(n));
  const Vector u0 = config.u0.size() ? config.u0 : Vector(Vector::Zero(m));
  require_size(x0, n, "x0");
  require_size(u0, m, "u0");

  ClosedLoopTrajectory traj;
  traj.phi_arrivals = config.learn_phi ? sample_arrivals(config.phi_rate, config.horizon, derive_seed(config.seed, 0))
                                       : std::vector<double>{};
  traj.psi_arrivals = config.learn_psi ? sample_arrivals(config.psi_rate, config.horizon, derive_seed(config.seed, 1))
                                       : std::vector<double>{};
  std::mt19937_64 noise_rng(derive_seed(config.seed, 2));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto noisy = [&](double value, double sigma) { return sigma > 0.0 ? value + sigma * normal(noise_rng) : value; };

  const BasisSet& phi_basis = cost.phi_basis();
  const BasisSet& psi_basis = cost.psi_basis();
  std::optional<OnlineLearner> phi_learner, psi_learner;
  if (config.learn_phi) {
    phi_learner.emplace(phi_basis, config.phi_estimator, Vector::Zero(phi_basis.count()));
    std::vector<EvaluationRecord> seeds;
    for (const Vector& p : config.phi_seed_points) seeds.push_back({0.0, p, noisy(cost.phi(p), config.phi_noise)});
    phi_learner->seed(seeds);
  }
  if (config.learn_psi) {
    psi_learner.emplace(psi_basis, config.psi_estimator, Vector::Zero(psi_basis.count()));
    std::vector<EvaluationRecord> seeds;
    for (const Vector& p : config.psi_seed_points) seeds.push_back({0.0, p, noisy(cost.psi(p), config.psi_noise)});
    psi_learner->seed(seeds);
  }
  Vector alpha_hat = phi_learner ? phi_learner->current().value : cost.alpha();
  Vector rho_hat = psi_learner ? psi_learner->current().value : cost.rho();

  OracleOptions oracle;
  if (!cost.is_quadratic()) oracle.smoothness = smoothness_constants(cost).ell;
  std::optional<Vector> cached_u_star;
  auto u_star_at = [&](const Vector& w) {
    if (disturbance.kind() == DisturbanceKind::constant && cached_u_star) return *cached_u_star;
    if (cached_u_star) oracle.warm_start = cached_u_star;
    cached_u_star = optimizer_oracle(cost, w, oracle);
    return *cached_u_star;
  };

  const Matrix& g = maps.g();
  VectorField field = [&](double t, const Vector& s) {
    const Vector x = s.head(n), u = s.tail(m);
    const Vector w = disturbance.value(t);
    Vector ds(n + m);
    ds.head(n) = plant.rhs(x, u, w);
    ds.tail(m) = controller_rhs(u, plant.output(x, w), alpha_hat, rho_hat, config.eta, phi_basis, psi_basis, g);
    return ds;
  };

  std::size_t phi_index = 0, psi_index = 0;
  auto log = [&](double t, const Vector& s, int event, std::size_t phi_before, std::size_t psi_before) {
    TrajectorySample smp;
    smp.t = t;
    smp.x = s.head(n);
    smp.u = s.tail(m);
    smp.w = disturbance.value(t);
    smp.w_rate = disturbance.rate(t);
    smp.y = plant.output(smp.x, smp.w);
    smp.u_star = u_star_at(smp.w);
    smp.x_star = maps.equilibrium_state(smp.u_star, smp.w);
    smp.event = event;
    smp.phi_index = phi_index;
    smp.psi_index = psi_index;
    smp.phi_index_before = phi_before;
    smp.psi_index_before = psi_before;
    traj.samples.push_back(std::move(smp));
  };

  const std::vector<Node> nodes = build_schedule(config, traj.phi_arrivals, traj.psi_arrivals);
  Vector state(n + m);
  state << x0, u0;
  log(0.0, state, 0, 0, 0);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const Node& node = nodes[i];
    const double h = node.t - nodes[i - 1].t;
    if (h > 0.0) state = rk4_step(field, nodes[i - 1].t, state, h);
    const std::size_t phi_before = phi_index, psi_before = psi_index;
    if (node.event & kPhiArrival) {
      const Vector u = state.tail(m);
      phi_learner->add({node.t, u, noisy(cost.phi(u), config.phi_noise)});
      alpha_hat = phi_learner->current().value;
      phi_index = phi_learner->history().size() - 1;
    }
    if (node.event & kPsiArrival) {
      const Vector y = plant.output(state.head(n), disturbance.value(node.t));
      psi_learner->add({node.t, y, noisy(cost.psi(y), config.psi_noise)});
      rho_hat = psi_learner->current().value;
      psi_index = psi_learner->history().size() - 1;
    }
    if (node.log) log(node.t, state, node.event, phi_before, psi_before);
  }

  traj.phi_estimates = phi_learner ? phi_learner->history()
                                   : std::vector<ParameterEstimate>{{cost.alpha(), 0.0, EstimatorKind::ls}};
  traj.psi_estimates = psi_learner ? psi_learner->history()
                                   : std::vector<ParameterEstimate>{{cost.rho(), 0.0, EstimatorKind::ls}};
  return traj;
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& out, const ClosedLoopTrajectory& trajectory,
                          const std::vector<std::optional<double>>& bound) {
  require(bound.empty() || bound.size() == trajectory.samples.size(), ErrorKind::dimension,
          "bound column length differs from the trajectory");
  out << "t,z_norm,u_err_norm,x_err_norm,bound,event,wdot_norm\n";
  for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
    const TrajectorySample& s = trajectory.samples[i];
    out << format_number(s.t) << ',' << format_number(s.z_norm()) << ',' << format_number(s.u_error()) << ','
        << format_number(s.x_error()) << ',';
    if (!bound.empty() && bound[i]) out << format_number(*bound[i]);
    out << ',' << s.event << ',' << format_number(s.w_rate.norm()) << '\n';
  }
}

}  // namespace gradflow
