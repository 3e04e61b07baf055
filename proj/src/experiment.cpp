#include "gradflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <limits>

#include <json.hpp>

#include "gradflow/presets.hpp"

namespace gradflow {

using json = nlohmann::ordered_json;

namespace {

// Validation problems are collected, not thrown one at a time.
class Problems {
 public:
  void add(const std::string& path, const std::string& msg) { list_.push_back(path + ": " + msg); }
  bool empty() const { return list_.empty(); }
  [[noreturn]] void raise() const {
    std::string msg = std::to_string(list_.size()) + " config problem(s)";
    for (const auto& p : list_) msg += "\n  " + p;
    throw Error(ErrorKind::config, msg);
  }

 private:
  std::vector<std::string> list_;
};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed, Problems& probs) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) probs.add(join(path, key), "unknown key");
  }
}

const json* child(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::optional<double> read_number(const json& obj, const std::string& path, const std::string& key,
                                  Problems& probs) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_number()) {
    probs.add(join(path, key), "expected a number");
    return std::nullopt;
  }
  return v->get<double>();
}

std::optional<Vector> read_vector(const json& v, const std::string& path, Problems& probs) {
  if (!v.is_array()) {
    probs.add(path, "expected a list of numbers");
    return std::nullopt;
  }
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      probs.add(path + "[" + std::to_string(i) + "]", "expected a number");
      return std::nullopt;
    }
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

std::optional<Vector> read_vector(const json& obj, const std::string& path, const std::string& key,
                                  Problems& probs) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  return read_vector(*v, join(path, key), probs);
}

std::optional<Matrix> read_matrix(const json& obj, const std::string& path, const std::string& key,
                                  Problems& probs) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  const std::string where = join(path, key);
  if (!v->is_array() || v->empty()) {
    probs.add(where, "expected a non-empty list of rows");
    return std::nullopt;
  }
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < v->size(); ++i) {
    auto row = read_vector((*v)[i], where + "[" + std::to_string(i) + "]", probs);
    if (!row) return std::nullopt;
    rows.push_back(*row);
  }
  const Eigen::Index cols = rows[0].size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      probs.add(where, "rows have different lengths");
      return std::nullopt;
    }
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

std::optional<std::vector<Vector>> read_points(const json& obj, const std::string& path, const std::string& key,
                                               Problems& probs) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  const std::string where = join(path, key);
  if (!v->is_array()) {
    probs.add(where, "expected a list of points");
    return std::nullopt;
  }
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < v->size(); ++i) {
    auto p = read_vector((*v)[i], where + "[" + std::to_string(i) + "]", probs);
    if (!p) return std::nullopt;
    pts.push_back(*p);
  }
  return pts;
}

std::optional<std::string> read_string(const json& obj, const std::string& path, const std::string& key,
                                       Problems& probs) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_string()) {
    probs.add(join(path, key), "expected a string");
    return std::nullopt;
  }
  return v->get<std::string>();
}

std::optional<bool> read_bool(const json& obj, const std::string& path, const std::string& key, Problems& probs) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_boolean()) {
    probs.add(join(path, key), "expected true or false");
    return std::nullopt;
  }
  return v->get<bool>();
}

const json* read_object(const json& obj, const std::string& path, const std::string& key, Problems& probs) {
  const json* v = child(obj, key);
  if (!v) return nullptr;
  if (!v->is_object()) {
    probs.add(join(path, key), "expected an object");
    return nullptr;
  }
  return v;
}

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void expect_dims(const Matrix& m, Eigen::Index r, Eigen::Index c, const std::string& key, Problems& probs) {
  if (m.rows() != r || m.cols() != c) {
    probs.add(key, "expected " + std::to_string(r) + "x" + std::to_string(c) + ", got " + dims(m));
  }
}

void expect_size(const Vector& v, Eigen::Index n, const std::string& key, Problems& probs) {
  if (v.size() != n) probs.add(key, "expected length " + std::to_string(n) + ", got " + std::to_string(v.size()));
}

json to_json(const Vector& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

json to_json(const std::vector<Vector>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back(to_json(p));
  return out;
}

json to_json(const TermLearningConfig& t) {
  return {{"enabled", t.enabled},
          {"estimator", to_string(t.estimator.kind)},
          {"lambda", t.estimator.lambda},
          {"covariance_scale", t.estimator.covariance_scale},
          {"noise_std", t.noise_std},
          {"seed_points", to_json(t.seed_points)}};
}

json to_json(const TailConfig& t) { return {{"basis", t.basis}, {"coefficients", to_json(t.coefficients)}}; }

void read_learning(const json& obj, const std::string& path, TermLearningConfig& t, Problems& probs) {
  check_keys(obj, path, {"enabled", "estimator", "lambda", "covariance_scale", "noise_std", "seed_points"}, probs);
  if (auto v = read_bool(obj, path, "enabled", probs)) t.enabled = *v;
  if (auto v = read_string(obj, path, "estimator", probs)) {
    try {
      t.estimator.kind = parse_estimator(*v);
    } catch (const Error&) {
      probs.add(join(path, "estimator"), "unknown estimator '" + *v + "' (ls, ridge, lasso, rls)");
    }
  }
  if (auto v = read_number(obj, path, "lambda", probs)) t.estimator.lambda = *v;
  if (auto v = read_number(obj, path, "covariance_scale", probs)) t.estimator.covariance_scale = *v;
  if (auto v = read_number(obj, path, "noise_std", probs)) t.noise_std = *v;
  if (auto v = read_points(obj, path, "seed_points", probs)) t.seed_points = *v;

  if (t.noise_std < 0.0) probs.add(join(path, "noise_std"), "must be nonnegative");
  if (t.estimator.kind == EstimatorKind::ridge && !(t.estimator.lambda > 0.0))
    probs.add(join(path, "lambda"), "ridge needs lambda > 0");
  if (t.estimator.kind == EstimatorKind::lasso && t.estimator.lambda < 0.0)
    probs.add(join(path, "lambda"), "lasso needs lambda >= 0");
  if (t.estimator.kind == EstimatorKind::rls && !(t.estimator.covariance_scale > 0.0))
    probs.add(join(path, "covariance_scale"), "must be positive");
}

std::optional<TailConfig> read_tail(const json& obj, const std::string& path, const std::string& key,
                                    Problems& probs) {
  const json* v = child(obj, key);
  if (!v || v->is_null()) return std::nullopt;
  const std::string where = join(path, key);
  if (!v->is_object()) {
    probs.add(where, "expected an object or null");
    return std::nullopt;
  }
  check_keys(*v, where, {"basis", "coefficients"}, probs);
  TailConfig t;
  if (auto b = read_string(*v, where, "basis", probs)) t.basis = *b;
  if (t.basis != "sine") probs.add(join(where, "basis"), "only the sine tail basis is supported");
  if (auto c = read_vector(*v, where, "coefficients", probs)) t.coefficients = *c;
  else probs.add(join(where, "coefficients"), "required");
  return t;
}

void line_column(const std::string& text, std::size_t byte, std::size_t& line, std::size_t& column) {
  line = 1;
  column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

ExperimentConfig from_json(const json& root) {
  Problems probs;
  ExperimentConfig cfg;
  if (!root.is_object()) {
    probs.add("(root)", "expected an object");
    probs.raise();
  }
  check_keys(root, "", {"plant", "cost", "learning", "simulation", "output", "sweep"}, probs);

  // plant
  if (const json* plant = read_object(root, "", "plant", probs)) {
    check_keys(*plant, "plant", {"A", "B", "C", "D", "E", "Q"}, probs);
    for (auto [key, dst] : {std::pair{"A", &cfg.a}, {"B", &cfg.b}, {"C", &cfg.c}, {"D", &cfg.d}, {"E", &cfg.e},
                            {"Q", &cfg.lyapunov_weight}}) {
      if (auto m = read_matrix(*plant, "plant", key, probs)) *dst = *m;
      else if (std::string(key) != "Q" && !child(*plant, key)) probs.add(join("plant", key), "required");
    }
  } else {
    probs.add("plant", "required");
  }

  // cost
  if (const json* cost = read_object(root, "", "cost", probs)) {
    check_keys(*cost, "cost", {"curvature", "linear", "offset", "target", "phi_tail", "psi_tail"}, probs);
    if (auto m = read_matrix(*cost, "cost", "curvature", probs)) cfg.curvature = *m;
    else if (!child(*cost, "curvature")) probs.add("cost.curvature", "required");
    if (auto v = read_vector(*cost, "cost", "linear", probs)) cfg.linear = *v;
    if (auto v = read_number(*cost, "cost", "offset", probs)) cfg.offset = *v;
    if (auto v = read_vector(*cost, "cost", "target", probs)) cfg.target = *v;
    cfg.phi_tail = read_tail(*cost, "cost", "phi_tail", probs);
    cfg.psi_tail = read_tail(*cost, "cost", "psi_tail", probs);
  } else {
    probs.add("cost", "required");
  }

  if (const json* learning = read_object(root, "", "learning", probs)) {
    check_keys(*learning, "learning", {"phi", "psi"}, probs);
    if (const json* phi = read_object(*learning, "learning", "phi", probs))
      read_learning(*phi, "learning.phi", cfg.phi_learning, probs);
    if (const json* psi = read_object(*learning, "learning", "psi", probs))
      read_learning(*psi, "learning.psi", cfg.psi_learning, probs);
  }

  if (const json* sim = read_object(root, "", "simulation", probs)) {
    const std::string p = "simulation";
    check_keys(*sim, p,
               {"eta", "s", "step", "horizon", "phi_rate", "psi_rate", "seed", "x0", "u0", "disturbance"}, probs);
    if (auto v = read_number(*sim, p, "eta", probs)) cfg.eta = *v;
    if (auto v = read_number(*sim, p, "s", probs)) cfg.s = *v;
    if (auto v = read_number(*sim, p, "step", probs)) cfg.step = *v;
    if (auto v = read_number(*sim, p, "horizon", probs)) cfg.horizon = *v;
    if (auto v = read_number(*sim, p, "phi_rate", probs)) cfg.phi_rate = *v;
    if (auto v = read_number(*sim, p, "psi_rate", probs)) cfg.psi_rate = *v;
    if (const json* seed = child(*sim, "seed")) {
      if (seed->is_number_unsigned()) cfg.seed = seed->get<std::uint64_t>();
      else probs.add("simulation.seed", "expected a nonnegative integer");
    }
    if (auto v = read_vector(*sim, p, "x0", probs)) cfg.x0 = *v;
    if (auto v = read_vector(*sim, p, "u0", probs)) cfg.u0 = *v;
    if (const json* dist = read_object(*sim, p, "disturbance", probs)) {
      const std::string dp = "simulation.disturbance";
      check_keys(*dist, dp, {"kind", "offset", "amplitude", "omega", "phase", "times", "values"}, probs);
      DisturbanceConfig& d = cfg.disturbance;
      if (auto v = read_string(*dist, dp, "kind", probs)) d.kind = *v;
      if (auto v = read_vector(*dist, dp, "offset", probs)) d.offset = *v;
      if (auto v = read_vector(*dist, dp, "amplitude", probs)) d.amplitude = *v;
      if (auto v = read_number(*dist, dp, "omega", probs)) d.omega = *v;
      if (auto v = read_number(*dist, dp, "phase", probs)) d.phase = *v;
      if (auto v = read_vector(*dist, dp, "times", probs)) d.times.assign(v->begin(), v->end());
      if (auto v = read_points(*dist, dp, "values", probs)) d.values = *v;
    }
  }

  if (const json* out = read_object(root, "", "output", probs)) {
    check_keys(*out, "output", {"dir", "csv", "report", "log_every", "restart_policy"}, probs);
    if (auto v = read_string(*out, "output", "dir", probs)) cfg.out_dir = *v;
    if (auto v = read_string(*out, "output", "csv", probs)) cfg.csv_name = *v;
    if (auto v = read_string(*out, "output", "report", probs)) cfg.report_name = *v;
    if (const json* le = child(*out, "log_every")) {
      if (le->is_number_integer() && le->get<long>() >= 1) cfg.log_every = le->get<int>();
      else probs.add("output.log_every", "expected an integer >= 1");
    }
    if (auto v = read_string(*out, "output", "restart_policy", probs)) {
      try {
        cfg.restart_policy = parse_restart_policy(*v);
      } catch (const Error&) {
        probs.add("output.restart_policy", "expected per-arrival or global");
      }
    }
  }

  if (const json* sweep = read_object(root, "", "sweep", probs)) {
    check_keys(*sweep, "sweep", {"eta"}, probs);
    if (auto v = read_vector(*sweep, "sweep", "eta", probs)) {
      cfg.sweep_eta.assign(v->begin(), v->end());
      for (double e : cfg.sweep_eta)
        if (!(e > 0.0)) probs.add("sweep.eta", "gains must be positive");
    }
  }
  if (!probs.empty()) probs.raise();

  // Cross-field checks, with defaults that depend on dimensions.
  const Eigen::Index n = cfg.a.rows(), m = cfg.b.cols(), p = cfg.c.rows(), q = cfg.d.cols();
  expect_dims(cfg.a, n, n, "plant.A", probs);
  expect_dims(cfg.b, n, m, "plant.B", probs);
  expect_dims(cfg.c, p, n, "plant.C", probs);
  expect_dims(cfg.d, p, q, "plant.D", probs);
  expect_dims(cfg.e, n, q, "plant.E", probs);
  if (cfg.lyapunov_weight.size() == 0) cfg.lyapunov_weight = Matrix::Identity(n, n);
  expect_dims(cfg.lyapunov_weight, n, n, "plant.Q", probs);
  expect_dims(cfg.curvature, m, m, "cost.curvature", probs);
  if (cfg.curvature.rows() == cfg.curvature.cols() &&
      max_abs(cfg.curvature - cfg.curvature.transpose()) > 1e-12 * std::max(1.0, max_abs(cfg.curvature)))
    probs.add("cost.curvature", "must be symmetric");
  if (cfg.linear.size() == 0) cfg.linear = Vector::Zero(m);
  expect_size(cfg.linear, m, "cost.linear", probs);
  if (cfg.target.size() == 0) cfg.target = Vector::Zero(p);
  expect_size(cfg.target, p, "cost.target", probs);
  if (cfg.phi_tail) expect_size(cfg.phi_tail->coefficients, m, "cost.phi_tail.coefficients", probs);
  if (cfg.psi_tail) expect_size(cfg.psi_tail->coefficients, p, "cost.psi_tail.coefficients", probs);
  for (std::size_t i = 0; i < cfg.phi_learning.seed_points.size(); ++i)
    expect_size(cfg.phi_learning.seed_points[i], m, "learning.phi.seed_points[" + std::to_string(i) + "]", probs);
  for (std::size_t i = 0; i < cfg.psi_learning.seed_points.size(); ++i)
    expect_size(cfg.psi_learning.seed_points[i], p, "learning.psi.seed_points[" + std::to_string(i) + "]", probs);

  if (cfg.eta < 0.0) probs.add("simulation.eta", "must be nonnegative");
  if (!(cfg.s > 0.0 && cfg.s < 1.0)) probs.add("simulation.s", "must lie in (0, 1)");
  if (!(cfg.step > 0.0)) probs.add("simulation.step", "must be positive");
  if (!(cfg.horizon >= cfg.step)) probs.add("simulation.horizon", "must be at least one step");
  if (cfg.phi_rate < 0.0) probs.add("simulation.phi_rate", "must be nonnegative");
  if (cfg.psi_rate < 0.0) probs.add("simulation.psi_rate", "must be nonnegative");
  if (cfg.x0.size() == 0) cfg.x0 = Vector::Zero(n);
  expect_size(cfg.x0, n, "simulation.x0", probs);
  if (cfg.u0.size() == 0) cfg.u0 = Vector::Zero(m);
  expect_size(cfg.u0, m, "simulation.u0", probs);

  DisturbanceConfig& d = cfg.disturbance;
  const std::string dp = "simulation.disturbance";
  if (d.kind == "constant" || d.kind == "sinusoidal") {
    if (d.offset.size() == 0) d.offset = Vector::Zero(q);
    expect_size(d.offset, q, dp + ".offset", probs);
    if (d.kind == "sinusoidal") {
      if (d.amplitude.size() == 0) d.amplitude = Vector::Zero(q);
      expect_size(d.amplitude, q, dp + ".amplitude", probs);
    }
  } else if (d.kind == "piecewise-linear") {
    if (d.times.empty()) probs.add(dp + ".times", "required for piecewise-linear");
    if (d.values.size() != d.times.size()) probs.add(dp + ".values", "needs one point per knot time");
    for (std::size_t i = 0; i < d.values.size(); ++i)
      expect_size(d.values[i], q, dp + ".values[" + std::to_string(i) + "]", probs);
    for (std::size_t i = 1; i < d.times.size(); ++i)
      if (!(d.times[i] > d.times[i - 1])) probs.add(dp + ".times", "must be strictly increasing");
  } else {
    probs.add(dp + ".kind", "expected constant, sinusoidal or piecewise-linear");
  }
  if (!probs.empty()) probs.raise();
  return cfg;
}

json to_json(const ExperimentConfig& c) {
  json cost = {{"curvature", to_json(c.curvature)},
               {"linear", to_json(c.linear)},
               {"offset", c.offset},
               {"target", to_json(c.target)},
               {"phi_tail", c.phi_tail ? to_json(*c.phi_tail) : json(nullptr)},
               {"psi_tail", c.psi_tail ? to_json(*c.psi_tail) : json(nullptr)}};
  json dist = {{"kind", c.disturbance.kind}};
  if (c.disturbance.kind == "piecewise-linear") {
    dist["times"] = to_json(Vector(Eigen::Map<const Vector>(c.disturbance.times.data(),
                                                            static_cast<Eigen::Index>(c.disturbance.times.size()))));
    dist["values"] = to_json(c.disturbance.values);
  } else {
    dist["offset"] = to_json(c.disturbance.offset);
    if (c.disturbance.kind == "sinusoidal") {
      dist["amplitude"] = to_json(c.disturbance.amplitude);
      dist["omega"] = c.disturbance.omega;
      dist["phase"] = c.disturbance.phase;
    }
  }
  json out = {
      {"plant",
       {{"A", to_json(c.a)}, {"B", to_json(c.b)}, {"C", to_json(c.c)}, {"D", to_json(c.d)}, {"E", to_json(c.e)},
        {"Q", to_json(c.lyapunov_weight)}}},
      {"cost", cost},
      {"learning", {{"phi", to_json(c.phi_learning)}, {"psi", to_json(c.psi_learning)}}},
      {"simulation",
       {{"eta", c.eta},
        {"s", c.s},
        {"step", c.step},
        {"horizon", c.horizon},
        {"phi_rate", c.phi_rate},
        {"psi_rate", c.psi_rate},
        {"seed", c.seed},
        {"x0", to_json(c.x0)},
        {"u0", to_json(c.u0)},
        {"disturbance", dist}}},
      {"output",
       {{"dir", c.out_dir},
        {"csv", c.csv_name},
        {"report", c.report_name},
        {"log_every", c.log_every},
        {"restart_policy", to_string(c.restart_policy)}}}};
  if (!c.sweep_eta.empty()) {
    json etas = json::array();
    for (double e : c.sweep_eta) etas.push_back(e);
    out["sweep"] = {{"eta", etas}};
  }
  return out;
}

Vector vec4(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"benchmark", "benchmark-varying", "benchmark-exact", "benchmark-truncated", "benchmark-frozen"};
}

ExperimentConfig preset_config(const std::string& name) {
  const BenchmarkCase bc = benchmark_case();
  ExperimentConfig c;
  c.a = bc.plant.a();
  c.b = bc.plant.b();
  c.c = bc.plant.c();
  c.d = bc.plant.d();
  c.e = bc.plant.e();
  c.lyapunov_weight = bc.q;
  c.curvature = bc.phi.curvature;
  c.linear = bc.phi.linear;
  c.offset = bc.phi.offset;
  // The benchmark leaves the output target, the disturbance, the
  // recorded points and the initial state unstated; these are our choices.
  c.target = vec4(1.0, 1.0, 1.0, 1.0);
  c.phi_learning.enabled = true;
  c.phi_learning.seed_points = {vec4(0.5, -0.3, 0.2, 0.1), vec4(-0.4, 0.6, -0.2, 0.3),
                                vec4(0.1, 0.2, -0.5, -0.4), vec4(-0.2, -0.1, 0.4, 0.6)};
  c.eta = 0.15;
  c.s = 0.3;
  c.step = 1e-3;
  c.horizon = 80.0;
  c.phi_rate = 0.25;
  c.seed = 1;
  c.x0 = Vector::Zero(4);
  c.u0 = Vector::Zero(4);
  c.disturbance.kind = "constant";
  c.disturbance.offset = vec4(1.0, -1.0, 0.5, 0.2);

  if (name == "benchmark") return c;
  if (name == "benchmark-varying") {
    c.disturbance.kind = "sinusoidal";
    c.disturbance.amplitude = Vector::Constant(4, 0.2);
    c.disturbance.omega = 0.5;
    return c;
  }
  if (name == "benchmark-exact") {
    c.phi_learning.enabled = false;
    c.horizon = 40.0;
    return c;
  }
  if (name == "benchmark-truncated") {
    c.phi_learning.enabled = false;
    c.horizon = 40.0;
    c.phi_tail = TailConfig{"sine", Vector::Constant(4, 0.003)};
    c.psi_tail = TailConfig{"sine", Vector::Constant(4, 0.002)};
    return c;
  }
  if (name == "benchmark-frozen") {
    c.phi_learning.enabled = false;
    c.eta = 0.0;
    c.horizon = 40.0;
    c.u0 = vec4(0.5, -0.2, 0.1, 0.3);
    return c;
  }
  std::string known;
  for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
  throw Error(ErrorKind::config, "unknown preset '" + name + "' (known: " + known + ")");
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 0, column = 0;
    line_column(text, e.byte, line, column);
    throw Error(ErrorKind::config, "parse error at line " + std::to_string(line) + ", column " +
                                       std::to_string(column) + ": " + e.what());
  }
  if (root.is_object() && root.contains("preset")) {
    if (!root["preset"].is_string()) throw Error(ErrorKind::config, "preset: expected a string");
    json base = to_json(preset_config(root["preset"].get<std::string>()));
    root.erase("preset");
    base.merge_patch(root);
    root = std::move(base);
  }
  return from_json(root);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

Experiment build_experiment(const ExperimentConfig& cfg) {
  PlantModel plant(cfg.a, cfg.b, cfg.c, cfg.d, cfg.e);
  LyapunovCertificate lyap = make_lyapunov_certificate(plant.a(), cfg.lyapunov_weight);
  const SteadyStateMaps maps(plant);
  const Eigen::Index m = plant.m(), p = plant.p();

  auto tail = [](const std::optional<TailConfig>& t, Eigen::Index dim) -> std::optional<TruncationTail> {
    if (!t) return std::nullopt;
    return TruncationTail{sine_basis(dim), t->coefficients};
  };
  CompositeCost cost(quadratic_basis(m), pack_quadratic({cfg.curvature, cfg.linear, cfg.offset}),
                     quadratic_basis(p), tracking_cost_coefficients(cfg.target), maps.g(), maps.h(),
                     tail(cfg.phi_tail, m), tail(cfg.psi_tail, p));
  const SmoothnessConstants smooth = smoothness_constants(cost);

  std::optional<Certificate> cert;
  if (cfg.eta > 0.0) cert = compute_constants(make_certificate_inputs(plant, lyap, smooth, cfg.eta, cfg.s));

  SimulationConfig sim;
  sim.eta = cfg.eta;
  sim.step = cfg.step;
  sim.horizon = cfg.horizon;
  sim.phi_rate = cfg.phi_rate;
  sim.psi_rate = cfg.psi_rate;
  sim.phi_noise = cfg.phi_learning.noise_std;
  sim.psi_noise = cfg.psi_learning.noise_std;
  sim.seed = cfg.seed;
  sim.x0 = cfg.x0;
  sim.u0 = cfg.u0;
  sim.log_every = cfg.log_every;
  sim.learn_phi = cfg.phi_learning.enabled;
  sim.learn_psi = cfg.psi_learning.enabled;
  sim.phi_estimator = cfg.phi_learning.estimator;
  sim.psi_estimator = cfg.psi_learning.estimator;
  sim.phi_seed_points = cfg.phi_learning.seed_points;
  sim.psi_seed_points = cfg.psi_learning.seed_points;

  const DisturbanceConfig& d = cfg.disturbance;
  DisturbanceSignal w = DisturbanceSignal::constant(d.offset.size() ? d.offset : Vector(Vector::Zero(plant.q())));
  if (d.kind == "sinusoidal") {
    w = DisturbanceSignal::sinusoidal(d.offset, d.amplitude, d.omega, d.phase);
  } else if (d.kind == "piecewise-linear") {
    Matrix values(plant.q(), static_cast<Eigen::Index>(d.values.size()));
    for (std::size_t i = 0; i < d.values.size(); ++i) values.col(static_cast<Eigen::Index>(i)) = d.values[i];
    w = DisturbanceSignal::piecewise_linear(d.times, values);
  }
  return {std::move(plant), std::move(lyap), std::move(cost), smooth, cert, std::move(sim), std::move(w)};
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Experiment ex = build_experiment(cfg);
  RunResult res;
  res.trajectory = run_simulation(ex.plant, ex.cost, ex.simulation, ex.disturbance);
  const auto& smp = res.trajectory.samples;

  RunReport& rep = res.report;
  rep.policy = cfg.restart_policy;
  rep.eta = cfg.eta;
  rep.certificate = ex.certificate;
  rep.phi_arrivals = res.trajectory.phi_arrivals.size();
  rep.psi_arrivals = res.trajectory.psi_arrivals.size();
  rep.initial_z = smp.front().z_norm();
  rep.final_z = smp.back().z_norm();
  rep.final_phi_error = estimation_error(res.trajectory.phi_estimates.back().value, ex.cost.alpha());
  rep.final_psi_error = estimation_error(res.trajectory.psi_estimates.back().value, ex.cost.rho());
  double u_drift = 0.0;
  for (const auto& s : smp) u_drift = std::max(u_drift, (s.u - smp.front().u).cwiseAbs().maxCoeff());
  rep.u_frozen = u_drift == 0.0;
  const SteadyStateMaps maps(ex.plant);
  rep.plant_settled = (smp.back().x - maps.equilibrium_state(smp.back().u, smp.back().w)).norm() <= 1e-6;

  if (ex.certificate) {
    const Certificate& cert = *ex.certificate;
    rep.gain_ok = cert.gain_ok;
    rep.floor_epsilon = epsilon_condition(0.0, 0.0, cert);
    res.delta = delta_signal(res.trajectory, ex.cost);
    res.bound = evaluate_bound(res.trajectory, cert, ex.cost, res.delta, cfg.restart_policy);
    const BoundTrajectory& bt = *res.bound;

    std::size_t covered = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < smp.size(); ++i) {
      if (!bt.values[i]) continue;
      ++covered;
      worst = std::max(worst, smp[i].z_norm() - *bt.values[i]);
    }
    rep.bound_available = covered > 0;
    rep.max_violation = covered ? worst : 0.0;
    rep.certified_fraction = static_cast<double>(covered) / static_cast<double>(smp.size());

    for (std::size_t k = 0; k + 1 < bt.intervals.size(); ++k) {
      const BoundInterval& iv = bt.intervals[k];
      const auto& next = bt.values[bt.intervals[k + 1].first];
      if (!iv.left_limit || !next) continue;
      ++rep.bound_steps_checked;
      if (*next < *iv.left_limit) ++rep.bound_steps_down;
    }

    const BoundInterval& last = bt.intervals.back();
    if (last.valid) {
      rep.final_a = last.a;
      double sup_delta = 0.0, sup_wdot = 0.0;
      for (std::size_t i = last.first; i < smp.size(); ++i) {
        sup_delta = std::max({sup_delta, res.delta.value[i], res.delta.left[i]});
        sup_wdot = std::max(sup_wdot, smp[i].w_rate.norm());
      }
      rep.iss = iss_asymptote(cert, last.a, sup_delta, sup_wdot);
    }

    if (!cert.gain_ok || !rep.bound_available) rep.verdict = Verdict::inconclusive;
    else if (rep.max_violation > 1e-9) rep.verdict = Verdict::fail;
    else rep.verdict = Verdict::pass;
  } else {
    // η = 0: nothing to certify; the run checks that the loop is open.
    rep.verdict = rep.u_frozen && rep.plant_settled ? Verdict::pass : Verdict::fail;
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

std::vector<RunResult> run_sweep(const ExperimentConfig& config, unsigned threads) {
  const std::size_t count = config.sweep_eta.size();
  std::vector<RunResult> results(count);
  if (count == 0) return results;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        ExperimentConfig run = config;
        run.eta = config.sweep_eta[i];
        run.seed = config.seed + i;
        run.sweep_eta.clear();
        results[i] = run_experiment(run);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

namespace {

void write_certificate(std::ostream& out, const Certificate& c) {
  const auto kv = [&](const char* k, double v) { out << k << " = " << format_number(v) << '\n'; };
  kv("certificate.s", c.inputs.s);
  kv("certificate.eta", c.inputs.eta);
  kv("certificate.eta_max", c.eta_max);
  kv("certificate.theta", c.theta);
  kv("certificate.c0", c.c0);
  kv("certificate.c1", c.c1);
  kv("certificate.c2", c.c2);
  kv("certificate.c3", c.c3);
  kv("certificate.c4", c.c4);
  kv("certificate.c5", c.c5);
  kv("certificate.kappa1", c.kappa1);
  kv("certificate.kappa2", c.kappa2);
  kv("certificate.kappa3", c.kappa3);
  kv("certificate.epsilon_threshold", c.epsilon_threshold);
  kv("smoothness.ell_u", c.inputs.smooth.ell_u);
  kv("smoothness.ell_y", c.inputs.smooth.ell_y);
  kv("smoothness.ell", c.inputs.smooth.ell);
  kv("smoothness.mu_u", c.inputs.smooth.mu_u);
  kv("plant.lambda_min_q", c.inputs.lambda_min_q);
  kv("plant.lambda_min_p", c.inputs.lambda_min_p);
  kv("plant.lambda_max_p", c.inputs.lambda_max_p);
  kv("plant.norm_pab", c.inputs.pab_norm);
  kv("plant.norm_pae", c.inputs.pae_norm);
  kv("plant.norm_g", c.inputs.g_norm);
}

const char* flag(bool b) { return b ? "true" : "false"; }

}  // namespace

void write_report(std::ostream& out, const RunReport& r) {
  out << "verdict = " << to_string(r.verdict) << '\n';
  out << "eta = " << format_number(r.eta) << '\n';
  out << "restart_policy = " << to_string(r.policy) << '\n';
  out << "certificate.available = " << flag(r.certificate.has_value()) << '\n';
  if (r.certificate) {
    write_certificate(out, *r.certificate);
    out << "condition.gain = " << flag(r.gain_ok) << '\n';
    if (r.floor_epsilon) {
      out << "condition.epsilon_floor = " << format_number(r.floor_epsilon->epsilon) << '\n';
      out << "condition.epsilon = " << flag(r.floor_epsilon->satisfied) << '\n';
    }
    out << "bound.available = " << flag(r.bound_available) << '\n';
    out << "bound.certified_fraction = " << format_number(r.certified_fraction) << '\n';
    out << "bound.max_violation = " << format_number(r.max_violation) << '\n';
    out << "bound.steps_checked = " << r.bound_steps_checked << '\n';
    out << "bound.steps_down = " << r.bound_steps_down << '\n';
    out << "bound.final_a = " << (r.final_a ? format_number(*r.final_a) : "") << '\n';
    out << "iss_asymptote = " << (r.iss ? format_number(*r.iss) : "") << '\n';
  }
  out << "arrivals.phi = " << r.phi_arrivals << '\n';
  out << "arrivals.psi = " << r.psi_arrivals << '\n';
  out << "learning.final_phi_error = " << format_number(r.final_phi_error) << '\n';
  out << "learning.final_psi_error = " << format_number(r.final_psi_error) << '\n';
  out << "z.initial = " << format_number(r.initial_z) << '\n';
  out << "z.final = " << format_number(r.final_z) << '\n';
  out << "u_frozen = " << flag(r.u_frozen) << '\n';
  out << "plant_settled = " << flag(r.plant_settled) << '\n';
}

CertifyReport certify(const ExperimentConfig& config) {
  const Experiment ex = build_experiment(config);
  if (!ex.certificate) throw Error(ErrorKind::certificate_invalid, "no certificate for eta = 0");
  CertifyReport rep;
  rep.certificate = *ex.certificate;
  rep.eta_max = rep.certificate.eta_max;
  rep.floor_epsilon = epsilon_condition(0.0, 0.0, rep.certificate);
  if (config.phi_learning.enabled && !config.phi_learning.seed_points.empty()) {
    OnlineLearner learner(ex.cost.phi_basis(), config.phi_learning.estimator,
                          Vector::Zero(ex.cost.phi_basis().count()));
    std::vector<EvaluationRecord> seeds;
    for (const auto& p : config.phi_learning.seed_points) seeds.push_back({0.0, p, ex.cost.phi(p)});
    learner.seed(seeds);
    rep.seed_phi_error = estimation_error(learner.current().value, ex.cost.alpha());
    rep.seed_epsilon = epsilon_condition(*rep.seed_phi_error, 0.0, rep.certificate);
  }
  rep.all_conditions = rep.certificate.gain_ok && rep.floor_epsilon.satisfied && rep.floor_epsilon.a > 0.0;
  return rep;
}

void write_certify_report(std::ostream& out, const CertifyReport& r) {
  write_certificate(out, r.certificate);
  out << "condition.gain = " << flag(r.certificate.gain_ok) << '\n';
  out << "condition.epsilon_floor = " << format_number(r.floor_epsilon.epsilon) << '\n';
  out << "condition.epsilon = " << flag(r.floor_epsilon.satisfied) << '\n';
  out << "condition.decay_rate = " << format_number(r.floor_epsilon.a) << '\n';
  if (r.seed_phi_error) {
    out << "learning.seed_phi_error = " << format_number(*r.seed_phi_error) << '\n';
    out << "learning.seed_epsilon = " << format_number(r.seed_epsilon->epsilon) << '\n';
    out << "learning.seed_epsilon_ok = " << flag(r.seed_epsilon->satisfied) << '\n';
  }
  out << "verdict = " << (r.all_conditions ? "PASS" : "FAIL") << '\n';
}

}  // namespace gradflow
