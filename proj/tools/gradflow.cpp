#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "gradflow/experiment.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using namespace gradflow;

namespace {

struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string restart_policy;
};

void apply(const Overrides& o, ExperimentConfig& cfg) {
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.restart_policy.empty()) cfg.restart_policy = parse_restart_policy(o.restart_policy);
}

void write_run(const fs::path& dir, const ExperimentConfig& cfg, const RunResult& res) {
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / cfg.csv_name, std::ios::binary);
    write_trajectory_csv(csv, res.trajectory, res.bound ? res.bound->values : std::vector<std::optional<double>>{});
  }
  {
    std::ofstream rep(dir / cfg.report_name);
    write_report(rep, res.report);
    rep << "wall_seconds = " << format_number(res.report.wall_seconds) << '\n';
  }
  std::ofstream(dir / "config.json") << dump_config(cfg);
}

int simulate(ExperimentConfig cfg, const Overrides& o) {
  apply(o, cfg);
  if (!cfg.sweep_eta.empty()) {
    const auto results = run_sweep(cfg);
    bool all_pass = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
      ExperimentConfig run = cfg;
      run.eta = cfg.sweep_eta[i];
      run.seed = cfg.seed + i;
      run.sweep_eta.clear();
      write_run(fs::path(cfg.out_dir) / ("eta_" + std::to_string(i)), run, results[i]);
      std::cout << "eta = " << format_number(run.eta) << "  verdict = " << to_string(results[i].report.verdict)
                << '\n';
      all_pass = all_pass && results[i].report.verdict == Verdict::pass;
    }
    return all_pass ? 0 : 1;
  }
  const RunResult res = run_experiment(cfg);
  write_run(cfg.out_dir, cfg, res);
  write_report(std::cout, res.report);
  return res.report.verdict == Verdict::pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven gradient-flow control of LTI plants"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", o.config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "random seed (overrides the config)");
    sub->add_option("--restart-policy", o.restart_policy, "bound restart policy")
        ->check(CLI::IsMember({"per-arrival", "global"}));
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "run a configured experiment");
  add_common(simulate_cmd, true);
  auto* certify_cmd = app.add_subcommand("certify", "evaluate the stability conditions only");
  add_common(certify_cmd, true);
  auto* fig2a_cmd = app.add_subcommand("fig2a", "benchmark run with a constant disturbance");
  add_common(fig2a_cmd, false);
  auto* fig2b_cmd = app.add_subcommand("fig2b", "benchmark run with a sinusoidal disturbance");
  add_common(fig2b_cmd, false);
  auto* selftest_cmd = app.add_subcommand("selftest", "run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*selftest_cmd) return oracle::run_selftest(std::cout) ? 0 : 1;
    if (*certify_cmd) {
      ExperimentConfig cfg = load_config(o.config_path);
      apply(o, cfg);
      const CertifyReport rep = certify(cfg);
      write_certify_report(std::cout, rep);
      return rep.all_conditions ? 0 : 1;
    }
    if (*simulate_cmd) return simulate(load_config(o.config_path), o);
    const std::string preset = *fig2a_cmd ? "benchmark" : "benchmark-varying";
    ExperimentConfig cfg = o.config_path.empty() ? preset_config(preset) : load_config(o.config_path);
    if (o.out_dir.empty()) cfg.out_dir = *fig2a_cmd ? "out/fig2a" : "out/fig2b";
    return simulate(cfg, o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    // Bad input is a usage error; anything raised while running is a failure.
    switch (e.kind()) {
      case ErrorKind::config:
      case ErrorKind::dimension:
      case ErrorKind::precondition:
        return 2;
      default:
        return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
