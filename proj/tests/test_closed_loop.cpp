#include <doctest.h>

#include <sstream>

#include "gradflow/closed_loop.hpp"
#include "gradflow/experiment.hpp"
#include "gradflow/presets.hpp"
#include "oracles.hpp"
#include "selftest.hpp"

using namespace gradflow;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

ClosedLoopTrajectory run_preset(ExperimentConfig cfg) {
  const Experiment ex = build_experiment(cfg);
  return run_simulation(ex.plant, ex.cost, ex.simulation, ex.disturbance);
}

}  // namespace

TEST_CASE("disturbance signals") {
  const auto c = DisturbanceSignal::constant(vec({1, 2}));
  CHECK(max_abs(c.value(3.0) - vec({1, 2})) == 0.0);
  CHECK(c.rate(3.0).norm() == 0.0);

  const auto s = DisturbanceSignal::sinusoidal(vec({1, 0}), vec({0.5, 2}), 1.3, 0.2);
  for (double t : {0.0, 0.7, 5.1}) {
    const Vector fd = oracle::fd_jacobian([&](const Vector& x) { return s.value(x(0)); }, vec({t}));
    CHECK((s.rate(t) - fd.col(0)).norm() <= 1e-6 * std::max(1.0, s.rate(t).norm()));
  }

  Matrix values(1, 3);
  values << 0, 2, 2;
  const auto p = DisturbanceSignal::piecewise_linear({0.0, 1.0, 3.0}, values);
  CHECK(p.value(0.5)(0) == doctest::Approx(1.0));
  CHECK(p.rate(0.5)(0) == doctest::Approx(2.0));
  CHECK(p.rate(2.0)(0) == doctest::Approx(0.0));
  CHECK(p.value(10.0)(0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(DisturbanceSignal::piecewise_linear({1.0, 0.5}, Matrix::Zero(1, 2)), Error);
  CHECK_THROWS_AS(DisturbanceSignal::sinusoidal(vec({1}), vec({1, 2}), 1.0), Error);
}

TEST_CASE("controller vector field") {
  const BasisSet b = quadratic_basis(2);
  const Matrix g = Matrix::Identity(2, 2);
  const Vector u = vec({0.3, -1}), y = vec({2, 1});
  CHECK(controller_rhs(u, y, Vector::Zero(6), Vector::Zero(6), 0.7, b, b, g).norm() == 0.0);
  const Vector alpha = pack_quadratic({Matrix::Identity(2, 2), vec({1, 0}), 0.0});
  const Vector rho = tracking_cost_coefficients(vec({1, 1}));
  const Vector one = controller_rhs(u, y, alpha, rho, 0.5, b, b, g);
  const Vector two = controller_rhs(u, y, alpha, rho, 1.0, b, b, g);
  CHECK(max_abs(two - 2.0 * one) < 1e-15);
  CHECK(max_abs(one + 0.5 * ((u + vec({1, 0})) + (y - vec({1, 1})))) < 1e-15);
  CHECK_THROWS_AS(controller_rhs(u, y, alpha, rho, 1.0, b, b, Matrix::Identity(3, 2)), Error);

  // Exact parameters at the optimum and its steady state.
  const BenchmarkCase bc = benchmark_case();
  const SteadyStateMaps maps(bc.plant);
  const CompositeCost cost(quadratic_basis(4), pack_quadratic(bc.phi), quadratic_basis(4),
                           tracking_cost_coefficients(Vector::Ones(4)), maps.g(), maps.h());
  const Vector w = vec({1, -1, 0.5, 0.2});
  const Vector us = optimizer_oracle(cost, w);
  const Vector ys = bc.plant.output(maps.equilibrium_state(us, w), w);
  CHECK(controller_rhs(us, ys, cost.alpha(), cost.rho(), 0.15, cost.phi_basis(), cost.psi_basis(), maps.g())
            .norm() < 1e-10);
}

TEST_CASE("RK4 step") {
  const VectorField decay = [](double, const Vector& s) -> Vector { return -s; };
  const Vector x1 = rk4_step(decay, 0.0, vec({1}), 0.1);
  CHECK(x1(0) == doctest::Approx(0.9048375).epsilon(1e-7));
  CHECK(std::abs(x1(0) - std::exp(-0.1)) <= 1e-7);
  const VectorField zero = [](double, const Vector& s) -> Vector { return Vector::Zero(s.size()); };
  CHECK(max_abs(rk4_step(zero, 0.0, vec({1, 2}), 0.5) - vec({1, 2})) == 0.0);
  CHECK_THROWS_AS(rk4_step(zero, 0.0, vec({1}), 0.0), Error);
  const VectorField blowup = [](double, const Vector& s) -> Vector { return 1e300 * s.cwiseAbs2(); };
  try {
    rk4_step(blowup, 0.0, vec({1e10}), 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::divergence);
  }
}

TEST_CASE("Poisson arrivals") {
  CHECK(sample_arrivals(0.0, 100.0, 3).empty());
  CHECK(sample_arrivals(0.5, 100.0, 3) == sample_arrivals(0.5, 100.0, 3));
  CHECK(sample_arrivals(0.5, 100.0, 3) != sample_arrivals(0.5, 100.0, 4));
  const auto a = sample_arrivals(2.0, 1e4, 11);
  CHECK(std::is_sorted(a.begin(), a.end()));
  const double mean = a.back() / static_cast<double>(a.size());
  CHECK(std::abs(mean - 0.5) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(a.size())));
  try {
    sample_arrivals(-1.0, 1.0, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
}

TEST_CASE("exact parameters regulate the loop") {
  const auto traj = run_preset(preset_config("benchmark-exact"));
  CHECK(traj.samples.back().t == doctest::Approx(40.0));
  CHECK(traj.samples.back().z_norm() <= 1e-6);
  CHECK(traj.phi_arrivals.empty());
  CHECK(traj.phi_estimates.size() == 1);
}

TEST_CASE("zero gain leaves the input frozen and the plant settles") {
  ExperimentConfig cfg = preset_config("benchmark-frozen");
  const auto traj = run_preset(cfg);
  const Experiment ex = build_experiment(cfg);
  const SteadyStateMaps maps(ex.plant);
  for (const auto& s : traj.samples) CHECK(max_abs(s.u - cfg.u0) == 0.0);
  const auto& last = traj.samples.back();
  CHECK((last.x - maps.equilibrium_state(cfg.u0, last.w)).norm() <= 1e-6);
  CHECK((last.y - maps.steady_output(cfg.u0, last.w)).norm() <= 1e-6);
}

TEST_CASE("trajectory invariants under learning") {
  const ExperimentConfig cfg = preset_config("benchmark");
  const auto traj = run_preset(cfg);
  const Experiment ex = build_experiment(cfg);
  const SteadyStateMaps maps(ex.plant);

  CHECK(traj.phi_estimates.size() == traj.phi_arrivals.size() + 1);
  std::size_t events = 0;
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const auto& s = traj.samples[i];
    CHECK((s.x_star - maps.equilibrium_state(s.u_star, s.w)).norm() < 1e-12);
    if (s.event & kPhiArrival) {
      ++events;
      CHECK(s.phi_index == s.phi_index_before + 1);
      CHECK(traj.phi_estimates[s.phi_index].valid_from == s.t);
    } else {
      CHECK(s.phi_index == s.phi_index_before);
      if (i > 0) CHECK(s.phi_index == traj.samples[i - 1].phi_index);
    }
  }
  CHECK(events == traj.phi_arrivals.size());
  for (std::size_t k = 0; k < traj.phi_arrivals.size(); ++k)
    CHECK(traj.phi_estimates[k + 1].valid_from == traj.phi_arrivals[k]);
  // Seed data only: the fit is still off.
  CHECK(estimation_error(traj.phi_estimates.front().value, ex.cost.alpha()) > 1e-3);
  CHECK(estimation_error(traj.phi_estimates.back().value, ex.cost.alpha()) < 1e-8);
}

TEST_CASE("runs are deterministic") {
  ExperimentConfig cfg = preset_config("benchmark");
  cfg.horizon = 20.0;
  cfg.phi_learning.noise_std = 0.01;
  std::ostringstream a, b;
  write_trajectory_csv(a, run_preset(cfg));
  write_trajectory_csv(b, run_preset(cfg));
  CHECK(a.str() == b.str());
  cfg.seed = 2;
  std::ostringstream c;
  write_trajectory_csv(c, run_preset(cfg));
  CHECK(a.str() != c.str());
}

TEST_CASE("CSV layout") {
  ExperimentConfig cfg = preset_config("benchmark-exact");
  cfg.horizon = 0.05;
  cfg.log_every = 1;
  const auto traj = run_preset(cfg);
  std::vector<std::optional<double>> bound(traj.samples.size());
  bound[1] = 0.5;
  std::ostringstream out;
  write_trajectory_csv(out, traj, bound);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,z_norm,u_err_norm,x_err_norm,bound,event,wdot_norm");
  std::getline(in, line);
  CHECK(line.find(",,0,0") != std::string::npos);
  std::getline(in, line);
  CHECK(line.find(",0.5,0,0") != std::string::npos);
  CHECK_THROWS_AS(write_trajectory_csv(out, traj, std::vector<std::optional<double>>(2)), Error);
  CHECK(format_number(0.1) == "0.1");
}

TEST_CASE("simulation config validation") {
  const ExperimentConfig cfg = preset_config("benchmark-exact");
  const Experiment ex = build_experiment(cfg);
  SimulationConfig sim = ex.simulation;
  sim.step = 0.0;
  CHECK_THROWS_AS(run_simulation(ex.plant, ex.cost, sim, ex.disturbance), Error);
  sim = ex.simulation;
  sim.horizon = sim.step / 2;
  CHECK_THROWS_AS(run_simulation(ex.plant, ex.cost, sim, ex.disturbance), Error);
  sim = ex.simulation;
  sim.x0 = Vector::Zero(3);
  CHECK_THROWS_AS(run_simulation(ex.plant, ex.cost, sim, ex.disturbance), Error);
  CHECK_THROWS_AS(run_simulation(ex.plant, ex.cost, ex.simulation, DisturbanceSignal::constant(Vector::Zero(2))),
                  Error);
}

TEST_CASE("integrator order on the closed loop") {
  const double ratio = oracle::closed_loop_richardson_ratio(0.04, 2.0);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
}
