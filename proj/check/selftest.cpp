#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <string>

#include "gradflow/certificates.hpp"
#include "gradflow/experiment.hpp"
#include "gradflow/presets.hpp"
#include "oracles.hpp"

namespace oracle {

using namespace gradflow;

namespace {

CompositeCost benchmark_cost() {
  const BenchmarkCase bc = benchmark_case();
  const SteadyStateMaps maps(bc.plant);
  return CompositeCost(quadratic_basis(4), pack_quadratic(bc.phi), quadratic_basis(4),
                       tracking_cost_coefficients(Vector::Ones(4)), maps.g(), maps.h());
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

double closed_loop_richardson_ratio(double h, double horizon) {
  ExperimentConfig cfg = preset_config("benchmark-exact");
  cfg.horizon = horizon;
  cfg.log_every = 1 << 30;
  Vector ends[3];
  for (int k = 0; k < 3; ++k) {
    cfg.step = h / std::pow(2.0, k);
    const Experiment ex = build_experiment(cfg);
    const auto traj = run_simulation(ex.plant, ex.cost, ex.simulation, ex.disturbance);
    const auto& last = traj.samples.back();
    ends[k] = Vector(8);
    ends[k] << last.x, last.u;
  }
  return (ends[0] - ends[1]).norm() / (ends[1] - ends[2]).norm();
}

bool run_selftest(std::ostream& out) {
  int failures = 0;
  auto check = [&](const std::string& name, const std::function<std::string()>& body) {
    std::string detail;
    try {
      detail = body();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (detail.empty()) {
      out << "[ok]   " << name << '\n';
    } else {
      out << "[FAIL] " << name << ": " << detail << '\n';
      ++failures;
    }
  };

  check("lyapunov residual on random stable systems", [] {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index n = 1 + t % 7;
      const Matrix a = random_hurwitz(rng, n), q = random_spd(rng, n);
      const Matrix p = solve_lyapunov(a, q);
      if (lyapunov_residual(a, p, q) > 1e-9 * max_abs(q)) return std::string("residual too large");
      if (max_abs(p - lyapunov_by_eigenbasis(a, q)) > 1e-8 * (1.0 + max_abs(p)))
        return std::string("disagrees with the eigenbasis solve");
    }
    return std::string();
  });

  check("steady-state maps at equilibrium", [] {
    const BenchmarkCase bc = benchmark_case();
    const SteadyStateMaps maps(bc.plant);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
      const Vector u = random_vector(rng, 4, 3), w = random_vector(rng, 4, 3);
      const Vector x = maps.equilibrium_state(u, w);
      if (bc.plant.rhs(x, u, w).norm() > 1e-10 * (1 + x.norm())) return std::string("equilibrium residual");
      if ((bc.plant.output(x, w) - maps.steady_output(u, w)).norm() > 1e-9) return std::string("G, H mismatch");
    }
    return std::string();
  });

  check("basis jacobians against finite differences", [] {
    std::mt19937_64 rng(3);
    for (Eigen::Index m : {1, 2, 3, 4, 5}) {
      for (const BasisSet& b : {quadratic_basis(m), sine_basis(m)}) {
        for (int i = 0; i < 100; ++i) {
          const Vector u = random_vector(rng, m, 3.0);
          const Matrix fd = fd_jacobian([&](const Vector& x) { return b.evaluate(x); }, u);
          if ((b.jacobian(u) - fd).norm() > 1e-5 * std::max(1.0, fd.norm())) return std::string("mismatch");
        }
      }
    }
    return std::string();
  });

  check("quadratic pack/unpack round trip", [] {
    std::mt19937_64 rng(4);
    for (Eigen::Index m = 1; m <= 8; ++m) {
      const QuadraticCost c{random_spd(rng, m, 0.0), random_vector(rng, m), 0.3};
      const Vector alpha = pack_quadratic(c);
      if (max_abs(pack_quadratic(unpack_quadratic(alpha, m)) - alpha) != 0.0) return std::string("not lossless");
      const Vector u = random_vector(rng, m);
      if (std::abs(quadratic_basis(m).value(alpha, u) - c.value(u)) > 1e-10) return std::string("evaluation");
    }
    return std::string();
  });

  check("optimizer oracle: closed form against gradient descent", [] {
    const CompositeCost cost = benchmark_cost();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
      const Vector w = random_vector(rng, 4, 2);
      const Vector a = optimizer_oracle(cost, w, {.method = OracleMethod::closed_form});
      const Vector b = optimizer_oracle(cost, w, {.method = OracleMethod::gradient_descent});
      if (max_abs(a - b) > 1e-8) return std::string("solvers disagree");
    }
    return std::string();
  });

  check("PL inequality on the benchmark composite", [] {
    const CompositeCost cost = benchmark_cost();
    const double mu = smoothness_constants(cost).mu_u;
    std::mt19937_64 rng(6);
    const Vector w = random_vector(rng, 4);
    const Vector us = optimizer_oracle(cost, w);
    for (int i = 0; i < 1000; ++i)
      if (!check_pl(cost, w, us + random_vector(rng, 4, 3.0), mu, 1e-10, us)) return std::string("violated");
    return std::string();
  });

  check("estimators: LS recovery, ridge optimality, lasso oracle, RLS", [] {
    std::mt19937_64 rng(7);
    const Vector alpha = pack_quadratic(benchmark_case().phi);
    Dataset data(quadratic_basis(4));
    for (int k = 0; k < 30; ++k) {
      const Vector u = random_vector(rng, 4, 2);
      data.append({0.0, u, data.basis().value(alpha, u)});
    }
    if ((fit_ls(data).estimate - alpha).norm() > 1e-8) return std::string("LS recovery");
    const Matrix b = data.regression_matrix();
    const Vector y = data.targets();
    const Vector r = fit_ridge(b, y, 0.5);
    if ((b.transpose() * (b * r - y) + 0.5 * r).norm() > 1e-10 * std::max(1.0, y.norm()))
      return std::string("ridge first-order condition");
    for (int t = 0; t < 10; ++t) {
      Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, 5, 5));
      const Matrix qm = qr.householderQ() * Matrix::Identity(5, 5);
      const Vector yq = random_vector(rng, 5, 2);
      if ((fit_lasso(qm, yq, 0.3) - coordinate_descent_lasso(qm, yq, 0.3)).norm() > 1e-8)
        return std::string("lasso against coordinate descent");
    }
    RlsState st = rls_init(Vector::Zero(15), 1e6);
    for (const auto& rec : data.records()) st = rls_update(st, rec, data.basis());
    if ((st.estimate - fit_ls(data).estimate).norm() > 1e-4) return std::string("RLS against batch LS");
    return std::string();
  });

  check("poisson arrivals", [] {
    if (!sample_arrivals(0.0, 100.0, 1).empty()) return std::string("rate 0 not empty");
    const auto a = sample_arrivals(2.0, 1e4, 9), b = sample_arrivals(2.0, 1e4, 9);
    if (a != b) return std::string("not deterministic");
    const double mean = a.back() / static_cast<double>(a.size());
    if (std::abs(mean - 0.5) > 3.0 * 0.5 / std::sqrt(static_cast<double>(a.size())))
      return std::string("mean gap off");
    return std::string();
  });

  check("gain bound equals the proof's limit", [] {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 0.99), pos(0.1, 10.0);
    for (int i = 0; i < 10000; ++i) {
      const double s = u(rng), lq = pos(rng), pab = pos(rng), ly = pos(rng), g = pos(rng), c = pos(rng);
      if (rel(gain_bound(s, lq, pab, ly, g, c), proof_gain_limit(s, lq, pab, ly, g, c)) > 1e-12)
        return std::string("mismatch");
    }
    return std::string();
  });

  check("certificate constants against the reference implementation", [] {
    const ExperimentConfig cfg = preset_config("benchmark");
    const Experiment ex = build_experiment(cfg);
    const Certificate& c = *ex.certificate;
    const ReferenceConstants r = reference_constants(cfg.a, cfg.b, cfg.c, cfg.e, cfg.lyapunov_weight,
                                                     cfg.curvature, cfg.eta, cfg.s);
    const double pairs[][2] = {{c.theta, r.theta}, {c.eta_max, r.eta_max}, {c.c0, r.c0}, {c.c1, r.c1},
                               {c.c2, r.c2},       {c.c3, r.c3},           {c.c4, r.c4}, {c.c5, r.c5},
                               {c.kappa1, r.kappa1}, {c.kappa2, r.kappa2}, {c.kappa3, r.kappa3}};
    for (const auto& p : pairs)
      if (rel(p[0], p[1]) > 1e-8) return std::string("constant mismatch");
    if (c.kappa1 < 1.0) return std::string("kappa1 < 1");
    return std::string();
  });

  check("bound recursion against the constant-forcing closed form", [] {
    ClosedLoopTrajectory traj;
    const double h = 0.01;
    for (int i = 0; i <= 1000; ++i) {
      TrajectorySample s;
      s.t = i * h;
      s.u = s.u_star = Vector::Zero(1);
      s.x = s.x_star = Vector::Zero(1);
      if (i == 0) s.u(0) = 2.0;
      s.w = s.w_rate = Vector::Zero(1);
      traj.samples.push_back(s);
    }
    traj.phi_estimates = {{Vector::Zero(1), 0.0, EstimatorKind::ls}};
    traj.psi_estimates = {{Vector::Zero(1), 0.0, EstimatorKind::ls}};
    Certificate cert;
    cert.kappa1 = 3.0;
    cert.kappa2 = 1.7;
    cert.kappa3 = 0.0;
    cert.c0 = 0.4;
    cert.c3 = 1.0;
    cert.epsilon_threshold = 0.4;
    cert.gain_ok = true;
    cert.inputs.smooth.ell_u_n = 1.0;
    const BasisSet one(1, 1, [](const Vector&) { return Vector::Ones(1); },
                       [](const Vector&) { return Matrix::Zero(1, 1); });
    const CompositeCost cost(one, Vector::Zero(1), one, Vector::Zero(1), Matrix::Identity(1, 1),
                             Matrix::Identity(1, 1));
    DeltaSeries delta{std::vector<double>(1001, 0.25), std::vector<double>(1001, 0.25)};
    const auto bound = evaluate_bound(traj, cert, cost, delta, RestartPolicy::per_arrival);
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
      const double ref = constant_forcing_bound(3.0, 1.7, 0.4, 2.0, 0.25, traj.samples[i].t);
      if (!bound.values[i] || std::abs(*bound.values[i] - ref) > 1e-8) return std::string("mismatch");
    }
    return std::string();
  });

  check("RK4 step on exponential decay", [] {
    const Vector x = rk4_step([](double, const Vector& s) -> Vector { return -s; }, 0.0, Vector::Ones(1), 0.1);
    if (std::abs(x(0) - std::exp(-0.1)) > 1e-7) return std::string("inaccurate");
    return std::string();
  });

  check("closed-loop integrator order", [] {
    const double ratio = closed_loop_richardson_ratio(0.04, 2.0);
    if (ratio < 12.0 || ratio > 20.0) return "Richardson ratio " + std::to_string(ratio);
    return std::string();
  });

  out << (failures == 0 ? "selftest: all checks passed" : "selftest: " + std::to_string(failures) + " failed")
      << '\n';
  return failures == 0;
}

}  // namespace oracle
