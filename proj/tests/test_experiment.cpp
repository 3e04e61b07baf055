#include <doctest.h>

#include <sstream>

#include "gradflow/experiment.hpp"
#include "gradflow/presets.hpp"

using namespace gradflow;

namespace {

std::string error_message(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("preset expands to the benchmark matrices") {
  const ExperimentConfig c = parse_config(R"({"preset": "benchmark"})");
  const BenchmarkCase bc = benchmark_case();
  CHECK(c.a == bc.plant.a());
  CHECK(c.b == bc.plant.b());
  CHECK(c.c == bc.plant.c());
  CHECK(c.e == bc.plant.e());
  CHECK(c.curvature == bc.phi.curvature);
  CHECK(c.linear == bc.phi.linear);
  CHECK(c.lyapunov_weight == bc.q);
  CHECK(c.a(2, 3) == 0.3043);
  CHECK(c.eta == 0.15);
  CHECK(c.s == 0.3);

  const ExperimentConfig o = parse_config(R"({"preset": "benchmark", "simulation": {"eta": 0.05, "horizon": 5}})");
  CHECK(o.eta == 0.05);
  CHECK(o.horizon == 5.0);
  CHECK(o.a == bc.plant.a());
  CHECK(o.phi_learning.seed_points.size() == 4);

  for (const auto& name : preset_names()) CHECK_NOTHROW(build_experiment(preset_config(name)));
  CHECK(contains(error_message(R"({"preset": "nope"})"), "unknown preset"));
}

TEST_CASE("config errors name the offending key") {
  const std::string msg =
      error_message(R"({"preset": "benchmark", "cost": {"curvature": [[1, 0], [0, 1]]}})");
  CHECK(contains(msg, "cost.curvature"));

  const std::string many = error_message(
      R"({"preset": "benchmark", "simulation": {"eta": "fast", "colour": 1}, "output": {"log_every": 0}})");
  CHECK(contains(many, "simulation.eta"));
  CHECK(contains(many, "simulation.colour"));
  CHECK(contains(many, "unknown key"));
  CHECK(contains(many, "output.log_every"));

  CHECK(contains(error_message(R"({"preset": "benchmark", "extra": {}})"), "extra"));
  CHECK(contains(error_message(R"({"preset": "benchmark", "learning": {"phi": {"estimator": "magic"}}})"),
                 "learning.phi.estimator"));
  CHECK(contains(error_message(R"({"preset": "benchmark", "sweep": {"eta": [0.1, -1]}})"), "sweep.eta"));
  CHECK(contains(error_message(R"({"cost": {}})"), "plant"));
  CHECK(contains(error_message("[1, 2]"), "expected an object"));
}

TEST_CASE("parse errors report line and column") {
  const std::string msg = error_message("{\n  \"plant\": {\n    \"A\": [1,,2]\n}");
  CHECK(contains(msg, "line 3"));
  CHECK(contains(msg, "column"));
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("dump and parse round trip") {
  for (const auto& name : preset_names()) {
    ExperimentConfig c = preset_config(name);
    c.sweep_eta = {0.05, 0.1};
    c.restart_policy = RestartPolicy::global;
    const ExperimentConfig r = parse_config(dump_config(c));
    CHECK(dump_config(r) == dump_config(c));
    CHECK(r.a == c.a);
    CHECK(r.seed == c.seed);
    CHECK(r.eta == c.eta);
    CHECK(r.phi_tail.has_value() == c.phi_tail.has_value());
    CHECK(r.restart_policy == RestartPolicy::global);
    CHECK(r.sweep_eta == c.sweep_eta);
  }
}

TEST_CASE("certify reports every condition on the benchmark") {
  const CertifyReport r = certify(preset_config("benchmark"));
  CHECK(r.certificate.gain_ok);
  CHECK(r.floor_epsilon.satisfied);
  CHECK(r.floor_epsilon.boundary);
  CHECK(r.all_conditions);
  CHECK(r.eta_max > 0.15);
  REQUIRE(r.seed_phi_error.has_value());
  // Four recorded points cannot pin down fifteen coefficients.
  CHECK(*r.seed_phi_error > 0.0);
  REQUIRE(r.seed_epsilon.has_value());
  CHECK_FALSE(r.seed_epsilon->satisfied);
  std::ostringstream out;
  write_certify_report(out, r);
  CHECK(contains(out.str(), "condition.gain"));
  CHECK(contains(out.str(), "PASS"));

  ExperimentConfig c = preset_config("benchmark");
  c.eta = 0.5;
  CHECK_FALSE(certify(c).all_conditions);
  CHECK_FALSE(certify(c).certificate.gain_ok);
}

TEST_CASE("zero gain freezes the input") {
  ExperimentConfig c = preset_config("benchmark-frozen");
  const RunResult r = run_experiment(c);
  CHECK(r.report.u_frozen);
  CHECK(r.report.plant_settled);
  CHECK(r.report.verdict == Verdict::pass);
  CHECK_FALSE(r.report.certificate.has_value());
  for (const auto& s : r.trajectory.samples) CHECK(s.u == c.u0);
}

TEST_CASE("run report on a short benchmark run") {
  ExperimentConfig c = preset_config("benchmark-exact");
  c.horizon = 10.0;
  const RunResult r = run_experiment(c);
  CHECK(r.report.verdict == Verdict::pass);
  CHECK(r.report.bound_available);
  CHECK(r.report.certified_fraction == 1.0);
  CHECK(r.report.max_violation <= 1e-9);
  CHECK(r.report.final_z < r.report.initial_z);
  std::ostringstream out;
  write_report(out, r.report);
  CHECK(contains(out.str(), "verdict = PASS"));
}

TEST_CASE("sweep gives each gain its own seed") {
  ExperimentConfig c = preset_config("benchmark");
  c.horizon = 3.0;
  c.sweep_eta = {0.05, 0.1, 0.15};
  const auto runs = run_sweep(c, 2);
  REQUIRE(runs.size() == 3);
  for (std::size_t i = 0; i < runs.size(); ++i) CHECK(runs[i].report.eta == c.sweep_eta[i]);

  ExperimentConfig single = c;
  single.sweep_eta.clear();
  single.eta = 0.1;
  single.seed = c.seed + 1;
  const RunResult direct = run_experiment(single);
  REQUIRE(direct.trajectory.samples.size() == runs[1].trajectory.samples.size());
  CHECK(direct.trajectory.phi_arrivals == runs[1].trajectory.phi_arrivals);
  CHECK(direct.trajectory.samples.back().u == runs[1].trajectory.samples.back().u);

  c.sweep_eta.clear();
  CHECK(run_sweep(c).empty());
}
