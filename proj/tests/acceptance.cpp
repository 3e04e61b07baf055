#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "gradflow/certificates.hpp"
#include "gradflow/experiment.hpp"
#include "gradflow/learning.hpp"
#include "gradflow/presets.hpp"
#include "oracles.hpp"
#include "selftest.hpp"

using namespace gradflow;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

CompositeCost benchmark_cost() {
  const BenchmarkCase bc = benchmark_case();
  const SteadyStateMaps maps(bc.plant);
  return CompositeCost(quadratic_basis(4), pack_quadratic(bc.phi), quadratic_basis(4),
                       tracking_cost_coefficients(Vector::Ones(4)), maps.g(), maps.h());
}

double max_rel(const Matrix& a, const Matrix& b) { return max_abs(a - b) / std::max(1.0, max_abs(b)); }

// Every logged sample with a bound must sit under it.
bool dominated(const RunResult& r, double slack) {
  if (!r.bound) return false;
  for (std::size_t i = 0; i < r.trajectory.samples.size(); ++i) {
    const auto& b = r.bound->values[i];
    if (b && r.trajectory.samples[i].z_norm() > *b + slack) return false;
  }
  return true;
}

Outcome lyapunov_reproduction() {
  Outcome o;
  const BenchmarkCase bc = benchmark_case();
  const Matrix a = bc.plant.a();
  const Matrix p = solve_lyapunov(a, bc.q);
  const double against_reference = max_abs(p - bc.reference_p);
  const double reference_residual = lyapunov_residual(a, bc.reference_p, bc.q);
  o.require(against_reference <= 1e-3, "solved P vs reference P max diff " + num(against_reference) + " <= 1e-3");
  o.require(reference_residual <= 5e-3, "reference P residual " + num(reference_residual) + " <= 5e-3");
  // Diagnostic: the reference matrix solves the transposed equation.
  const Matrix pt = solve_lyapunov(a.transpose(), bc.q);
  o.detail += "; reference P vs solve with A transposed: " + num(max_abs(pt - bc.reference_p)) +
              ", residual of reference P there " + num(lyapunov_residual(a.transpose(), bc.reference_p, bc.q));
  return o;
}

Outcome exact_regulation() {
  Outcome o;
  const ExperimentConfig cfg = preset_config("benchmark-exact");
  const RunResult r = run_experiment(cfg);
  const double a = r.report.certificate->c0;
  // Least-squares slope of log‖z‖ against t.
  double st = 0, sl = 0, stt = 0, stl = 0, n = 0;
  for (const auto& s : r.trajectory.samples) {
    const double z = s.z_norm();
    if (z <= 1e-13) continue;
    st += s.t;
    sl += std::log(z);
    stt += s.t * s.t;
    stl += s.t * std::log(z);
    n += 1;
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  const double final_z = r.trajectory.samples.back().z_norm();
  o.require(slope <= -a / 2, "log-slope " + num(slope) + " <= -a/2 = " + num(-a / 2));
  o.require(final_z <= 1e-6, "z(40) " + num(final_z) + " <= 1e-6");
  o.require(r.trajectory.samples.back().t == cfg.horizon, "horizon reached");
  return o;
}

Outcome fig2a_dominance() {
  Outcome o;
  ExperimentConfig cfg = preset_config("benchmark");
  cfg.restart_policy = RestartPolicy::per_arrival;
  const RunResult r = run_experiment(cfg);
  o.require(r.report.bound_available, "bound available");
  o.require(dominated(r, 1e-9), "dominance (max violation " + num(r.report.max_violation) + ")");
  o.require(r.report.bound_steps_checked > 0 && r.report.bound_steps_down == r.report.bound_steps_checked,
            "downward step at " + std::to_string(r.report.bound_steps_down) + "/" +
                std::to_string(r.report.bound_steps_checked) + " arrivals with a bound on both sides (" +
                std::to_string(r.report.phi_arrivals) + " arrivals, certified fraction " +
                num(r.report.certified_fraction) + ")");
  return o;
}

Outcome fig2b_dominance() {
  Outcome o;
  ExperimentConfig cfg = preset_config("benchmark-varying");
  cfg.horizon = 80.0;
  const RunResult r = run_experiment(cfg);
  o.require(r.report.bound_available, "bound available");
  o.require(dominated(r, 1e-9), "dominance (max violation " + num(r.report.max_violation) + ")");
  o.require(r.report.iss.has_value(), "ISS asymptote defined");
  if (r.report.iss) {
    double worst = 0.0;
    for (const auto& s : r.trajectory.samples)
      if (s.t >= cfg.horizon - 20.0) worst = std::max(worst, s.z_norm());
    o.require(worst <= 1.1 * *r.report.iss,
              "max z over last 20 s " + num(worst) + " <= 1.1 x ISS " + num(*r.report.iss));
  }
  return o;
}

Outcome estimators() {
  Outcome o;
  std::mt19937_64 rng(5);
  const Vector alpha = pack_quadratic(benchmark_case().phi);
  Dataset data(quadratic_basis(4));
  for (int k = 0; k < 40; ++k) {
    const Vector u = oracle::random_vector(rng, 4, 2.0);
    data.append({0.0, u, data.basis().value(alpha, u)});
  }
  const double ls = (fit_ls(data).estimate - alpha).norm();
  o.require(ls <= 1e-8, "LS recovery " + num(ls));

  const Matrix b = data.regression_matrix();
  const Vector y = data.targets();
  double ridge = 0.0;
  for (double lambda : {1e-3, 0.5, 10.0}) {
    const Vector r = fit_ridge(b, y, lambda);
    ridge = std::max(ridge, (b.transpose() * (b * r - y) + lambda * r).norm());
  }
  o.require(ridge <= 1e-10, "ridge first-order residual " + num(ridge));

  double lasso = 0.0;
  for (int t = 0; t < 50; ++t) {
    Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(rng, 5, 5));
    const Matrix q = qr.householderQ() * Matrix::Identity(5, 5);
    const Vector yq = oracle::random_vector(rng, 5, 2.0);
    for (double lambda : {0.0, 0.1, 0.7}) {
      lasso = std::max(lasso, (fit_lasso(q, yq, lambda) - oracle::coordinate_descent_lasso(q, yq, lambda)).norm());
    }
  }
  o.require(lasso <= 1e-8, "lasso vs coordinate descent (orthonormal 5x5) " + num(lasso));

  RlsState st = rls_init(Vector::Zero(alpha.size()), 1e6);
  for (const auto& rec : data.records()) st = rls_update(st, rec, data.basis());
  const double rls = (st.estimate - fit_ls(data).estimate).norm();
  o.require(rls <= 1e-4, "RLS vs batch LS " + num(rls));
  return o;
}

Outcome certificate_identities() {
  Outcome o;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(1e-3, 1.0 - 1e-3), pos(1e-2, 1e2);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double s = unit(rng), lq = pos(rng), pab = pos(rng), ly = pos(rng), g = pos(rng), c = pos(rng);
    const double ref = oracle::proof_gain_limit(s, lq, pab, ly, g, c);
    worst = std::max(worst, std::abs(gain_bound(s, lq, pab, ly, g, c) - ref) / ref);
  }
  o.require(worst <= 1e-12, "gain bound vs proof form, 1e4 draws, rel err " + num(worst));

  // Constant forcing: one scalar trajectory with Δ ≡ δ, ẇ ≡ 0.
  Certificate cert;
  cert.kappa1 = 3.0;
  cert.kappa2 = 1.7;
  cert.kappa3 = 0.4;
  cert.c0 = 0.5;
  cert.c3 = 1.0;
  cert.epsilon_threshold = 0.5;
  cert.gain_ok = true;
  cert.inputs.g_norm = 1.0;
  cert.inputs.smooth.ell_u_n = cert.inputs.smooth.ell_y_m = 1.0;
  const BasisSet one(1, 1, [](const Vector&) { return Vector::Ones(1); },
                     [](const Vector&) { return Matrix::Zero(1, 1); });
  const CompositeCost cost(one, Vector::Zero(1), one, Vector::Zero(1), Matrix::Identity(1, 1),
                           Matrix::Identity(1, 1));
  ClosedLoopTrajectory traj;
  const int steps = 4000;
  for (int i = 0; i <= steps; ++i) {
    TrajectorySample s;
    s.t = i * 5e-3;
    s.u = s.u_star = s.x = s.x_star = s.w = s.w_rate = Vector::Zero(1);
    if (i == 0) s.u(0) = 1.5;
    traj.samples.push_back(s);
  }
  traj.phi_estimates = traj.psi_estimates = {{Vector::Zero(1), 0.0, EstimatorKind::ls}};
  const DeltaSeries delta{std::vector<double>(steps + 1, 0.3), std::vector<double>(steps + 1, 0.3)};
  const auto bt = evaluate_bound(traj, cert, cost, delta, RestartPolicy::per_arrival);
  double recursion = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double ref = oracle::constant_forcing_bound(cert.kappa1, cert.kappa2, cert.c0, 1.5, 0.3, traj.samples[i].t);
    recursion = std::max(recursion, std::abs(*bt.values[i] - ref));
  }
  o.require(recursion <= 1e-8, "bound recursion vs closed form " + num(recursion));

  bool kappa = true, start = true;
  for (const char* name : {"benchmark", "benchmark-varying", "benchmark-exact", "benchmark-truncated"}) {
    const RunResult r = run_experiment(preset_config(name));
    kappa = kappa && r.report.certificate && r.report.certificate->kappa1 >= 1.0;
    if (!r.bound) continue;
    for (const auto& iv : r.bound->intervals) {
      if (iv.valid) start = start && *r.bound->values[iv.first] >= r.trajectory.samples[iv.first].z_norm();
    }
  }
  o.require(kappa, "kappa1 >= 1 on all runs");
  o.require(start, "bound(t0) >= z(t0) at every restart on all runs");
  return o;
}

Outcome numerical_properties() {
  Outcome o;
  std::mt19937_64 rng(13);
  double jac = 0.0;
  for (const BasisSet& b : {quadratic_basis(4), sine_basis(4), quadratic_basis(2)}) {
    for (int i = 0; i < 200; ++i) {
      const Vector u = oracle::random_vector(rng, b.dim(), 2.0);
      const Matrix fd = oracle::fd_jacobian([&](const Vector& x) { return b.evaluate(x); }, u);
      jac = std::max(jac, (b.jacobian(u) - fd).norm() / std::max(1.0, fd.norm()));
    }
  }
  o.require(jac <= 1e-5, "basis Jacobians vs finite differences rel err " + num(jac));

  const double ratio = oracle::closed_loop_richardson_ratio(0.04, 2.0);
  o.require(ratio >= 12.0 && ratio <= 20.0, "closed-loop Richardson ratio " + num(ratio));

  const CompositeCost cost = benchmark_cost();
  const double mu = smoothness_constants(cost).mu_u;
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vector w = oracle::random_vector(rng, 4, 2.0);
    const Vector us = optimizer_oracle(cost, w);
    const Vector u = us + oracle::random_vector(rng, 4, 5.0);
    if (!check_pl(cost, w, u, mu, 1e-10, us)) ++violations;
  }
  o.require(violations == 0, "PL inequality at 1e3 points, " + std::to_string(violations) + " violations");
  return o;
}

Outcome truncation() {
  Outcome o;
  ExperimentConfig cfg = preset_config("benchmark-truncated");
  const RunResult r = run_experiment(cfg);
  const auto& floor = *r.report.floor_epsilon;
  o.require(floor.satisfied && !floor.boundary,
            "tail epsilon " + num(floor.epsilon) + " < threshold " + num(r.report.certificate->epsilon_threshold));
  o.require(r.report.verdict == Verdict::pass && dominated(r, 1e-9),
            std::string("tail run ") + to_string(r.report.verdict) + ", dominance at every sample");

  // Grow the tail until the learning condition fails.
  double scale = 1.0;
  ExperimentConfig big = cfg;
  while (certify(big).floor_epsilon.satisfied) {
    scale *= 1.25;
    big.phi_tail->coefficients = cfg.phi_tail->coefficients * scale;
    big.psi_tail->coefficients = cfg.psi_tail->coefficients * scale;
  }
  const RunResult rb = run_experiment(big);
  o.require(rb.report.verdict == Verdict::inconclusive && !rb.report.bound_available,
            "tail x" + num(scale) + " (epsilon " + num(rb.report.floor_epsilon->epsilon) + ") reported " +
                to_string(rb.report.verdict));
  return o;
}

Outcome determinism() {
  Outcome o;
  auto csv = [] {
    const RunResult r = run_experiment(preset_config("benchmark"));
    std::ostringstream out;
    write_trajectory_csv(out, r.trajectory, r.bound->values);
    return out.str();
  };
  const std::string a = csv(), b = csv();
  o.require(!a.empty() && a == b, "two fig2a runs give identical CSV (" + std::to_string(a.size()) + " bytes)");
  return o;
}

struct Criterion {
  const char* title;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion criteria[] = {
      {"Lyapunov reproduction", 1.0, lyapunov_reproduction},
      {"exact-recovery regulation", 10.0, exact_regulation},
      {"bound dominance, constant disturbance", 30.0, fig2a_dominance},
      {"bound dominance, time-varying disturbance", 60.0, fig2b_dominance},
      {"estimator oracles", 5.0, estimators},
      {"certificate identities", 0.0, certificate_identities},
      {"numerical-analysis properties", 0.0, numerical_properties},
      {"truncated expansion", 30.0, truncation},
      {"determinism", 0.0, determinism},
  };
  constexpr int count = sizeof criteria / sizeof criteria[0];

  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > count) {
    std::fprintf(stderr, "criterion must be in 1..%d\n", count);
    return 2;
  }

  bool all = true;
  for (int k = 1; k <= count; ++k) {
    if (only != 0 && k != only) continue;
    const Criterion& c = criteria[k - 1];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0.0) out.require(secs < c.budget_seconds, "runtime " + num(secs) + " s < " +
                                                                          num(c.budget_seconds) + " s");
    std::printf("AC%d %s  %s: %s\n", k, out.pass ? "PASS" : "FAIL", c.title, out.detail.c_str());
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
