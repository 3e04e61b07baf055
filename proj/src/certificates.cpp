#include "gradflow/certificates.hpp"

#include <algorithm>
#include <cmath>

namespace gradflow {

namespace {

void require_s(double s) {
  require(s > 0.0 && s < 1.0, ErrorKind::precondition, "s must lie in (0, 1), got " + std::to_string(s));
}

// ‖α − α̂_k‖ for every logged estimate.
std::vector<double> estimate_errors(const std::vector<ParameterEstimate>& estimates, const Vector& truth) {
  std::vector<double> err;
  err.reserve(estimates.size());
  for (const auto& e : estimates) err.push_back(estimation_error(e.value, truth));
  return err;
}

}  // namespace

double compute_theta(double ell_y, double g_norm, double c_norm, double pab_norm) {
  const double coupling = ell_y * g_norm * c_norm;
  if (!(coupling > 0.0)) {
    throw Error(ErrorKind::degenerate_coupling, "theta is undefined without output coupling (ell_y |G| |C| = 0)");
  }
  require(pab_norm > 0.0, ErrorKind::precondition, "|P A^-1 B| must be positive");
  return coupling / (coupling + 2.0 * pab_norm);
}

double gain_bound(double s, double lambda_min_q, double pab_norm, double ell_y, double g_norm, double c_norm) {
  require_s(s);
  require(lambda_min_q > 0.0 && pab_norm > 0.0 && ell_y > 0.0 && g_norm > 0.0 && c_norm > 0.0,
          ErrorKind::precondition, "gain bound needs positive norms and lambda_min(Q)");
  return (1.0 - s) * (1.0 - s) * lambda_min_q / ((2.0 - s) * 2.0 * pab_norm * ell_y * g_norm * c_norm);
}

CertificateInputs make_certificate_inputs(const PlantModel& plant, const LyapunovCertificate& lyap,
                                          const SmoothnessConstants& smooth, double eta, double s) {
  const SteadyStateMaps maps(plant);
  CertificateInputs in;
  in.s = s;
  in.eta = eta;
  in.lambda_min_q = lyap.lambda_min_q;
  in.lambda_min_p = lyap.lambda_min_p;
  in.lambda_max_p = lyap.lambda_max_p;
  in.pab_norm = spectral_norm(lyap.p * maps.a_inv_b());
  in.pae_norm = spectral_norm(lyap.p.transpose() * maps.a_inv_e());
  in.g_norm = spectral_norm(maps.g());
  in.c_norm = spectral_norm(plant.c());
  in.smooth = smooth;
  return in;
}

Certificate compute_constants(const CertificateInputs& in) {
  require_s(in.s);
  require(in.eta > 0.0, ErrorKind::precondition, "gain must be positive");
  require(in.lambda_min_p > 0.0 && in.lambda_max_p >= in.lambda_min_p && in.lambda_min_q > 0.0,
          ErrorKind::precondition, "invalid Lyapunov certificate spectrum");
  const SmoothnessConstants& sc = in.smooth;
  require(sc.mu_u > 0.0 && sc.ell >= sc.mu_u, ErrorKind::precondition, "need 0 < mu_u <= ell");

  Certificate c;
  c.inputs = in;
  c.theta = compute_theta(sc.ell_y, in.g_norm, in.c_norm, in.pab_norm);
  c.eta_max = gain_bound(in.s, in.lambda_min_q, in.pab_norm, sc.ell_y, in.g_norm, in.c_norm);
  c.gain_ok = check_gain(in.eta, c.eta_max);

  const double eta = in.eta, th = c.theta, mu = sc.mu_u, ell = sc.ell;
  c.c0 = in.s * std::min(2.0 * mu * eta, in.lambda_min_q / in.lambda_max_p);
  c.c1 = std::min((1.0 - th) * mu / (2.0 * eta), th * in.lambda_min_p / eta);
  c.c2 = std::max((1.0 - th) * ell / (2.0 * eta), th * in.lambda_max_p / eta);
  c.c3 = std::max(2.0 * eta * ell / mu, 4.0 * in.pab_norm / c.c1);
  c.c4 = std::sqrt(eta) * std::max(ell * std::sqrt(2.0 / mu), 2.0 * in.pab_norm / std::sqrt(in.lambda_min_p));
  c.c5 = 2.0 * in.pae_norm / (std::sqrt(eta) * std::sqrt(in.lambda_min_p));
  c.kappa1 = std::sqrt(c.c2 / c.c1);
  c.kappa2 = c.c4 / (2.0 * std::sqrt(c.c1));
  c.kappa3 = c.c5 / (2.0 * std::sqrt(c.c1));
  c.epsilon_threshold = c.c0 / c.c3;
  return c;
}

EpsilonCheck epsilon_condition(double sup_alpha_error, double sup_rho_error, const Certificate& cert) {
  require(sup_alpha_error >= 0.0 && sup_rho_error >= 0.0, ErrorKind::precondition,
          "estimation errors must be nonnegative");
  const SmoothnessConstants& sc = cert.inputs.smooth;
  const double g2 = cert.inputs.g_norm * cert.inputs.g_norm;
  EpsilonCheck out;
  out.epsilon = sc.ell_u_n * sup_alpha_error + sc.ell_y_m * g2 * sup_rho_error;
  if (sc.truncated) out.epsilon += sc.ell_u_e + sc.ell_y_e * g2;
  out.boundary = out.epsilon == 0.0;
  out.satisfied = out.epsilon < cert.epsilon_threshold;
  out.a = cert.c0 - out.epsilon * cert.c3;
  return out;
}

DeltaSeries delta_signal(const ClosedLoopTrajectory& traj, const CompositeCost& cost) {
  const std::vector<double> phi_err = estimate_errors(traj.phi_estimates, cost.alpha());
  const std::vector<double> psi_err = estimate_errors(traj.psi_estimates, cost.rho());
  const double g_norm = spectral_norm(cost.g());

  DeltaSeries out;
  out.value.reserve(traj.samples.size());
  out.left.reserve(traj.samples.size());
  for (const TrajectorySample& s : traj.samples) {
    const Vector y_star = cost.steady_output(s.u_star, s.w);
    const double jb = spectral_norm(cost.phi_basis().jacobian(s.u_star));
    const double jd = g_norm * spectral_norm(cost.psi_basis().jacobian(y_star));
    const double tails = cost.grad_phi_tail(s.u_star).norm() + g_norm * cost.grad_psi_tail(y_star).norm();
    out.value.push_back(jb * phi_err.at(s.phi_index) + jd * psi_err.at(s.psi_index) + tails);
    out.left.push_back(jb * phi_err.at(s.phi_index_before) + jd * psi_err.at(s.psi_index_before) + tails);
  }
  return out;
}

const char* to_string(RestartPolicy policy) {
  return policy == RestartPolicy::per_arrival ? "per-arrival" : "global";
}

RestartPolicy parse_restart_policy(const std::string& name) {
  if (name == "per-arrival") return RestartPolicy::per_arrival;
  if (name == "global") return RestartPolicy::global;
  throw Error(ErrorKind::config, "unknown restart policy '" + name + "' (expected per-arrival or global)");
}

double exponential_increment(double c, double dt, double f0, double f1) {
  if (dt <= 0.0) return 0.0;
  if (c == 0.0) return 0.5 * dt * (f0 + f1);
  const double r = c * dt;
  const double one_minus_e = -std::expm1(-r);
  // 1 − (1 − e^{−r})/r, by series where the difference cancels.
  const double slope_weight =
      r < 1e-4 ? r / 2.0 - r * r / 6.0 + r * r * r / 24.0 : 1.0 - one_minus_e / r;
  return f0 * one_minus_e / c + (f1 - f0) * slope_weight / c;
}

BoundTrajectory evaluate_bound(const ClosedLoopTrajectory& traj, const Certificate& cert,
                               const CompositeCost& cost, const DeltaSeries& delta, RestartPolicy policy) {
  const auto& smp = traj.samples;
  const std::size_t count = smp.size();
  require(delta.value.size() == count && delta.left.size() == count, ErrorKind::dimension,
          "Delta series length differs from the trajectory");
  BoundTrajectory out;
  out.values.assign(count, std::nullopt);
  out.times.reserve(count);
  for (const auto& s : smp) out.times.push_back(s.t);
  if (count == 0) return out;

  const std::vector<double> phi_err = estimate_errors(traj.phi_estimates, cost.alpha());
  const std::vector<double> psi_err = estimate_errors(traj.psi_estimates, cost.rho());
  std::vector<double> wdot(count);
  for (std::size_t i = 0; i < count; ++i) wdot[i] = smp[i].w_rate.norm();

  // Envelope over [first, last] anchored at `first` with rate a. Writes the
  // values for first..last-1 (and last when `own_last`); returns the value at last.
  auto sweep = [&](std::size_t first, std::size_t last, double a, bool own_last) {
    const double c = 0.5 * a;
    const double z0 = smp[first].z_norm();
    double i_delta = 0.0, i_wdot = 0.0;
    double value = cert.kappa1 * z0;
    out.values[first] = value;
    for (std::size_t j = first + 1; j <= last; ++j) {
      const double dt = smp[j].t - smp[j - 1].t;
      const double decay = std::exp(-c * dt);
      i_delta = decay * i_delta + exponential_increment(c, dt, delta.value[j - 1], delta.left[j]);
      i_wdot = decay * i_wdot + exponential_increment(c, dt, wdot[j - 1], wdot[j]);
      value = cert.kappa1 * std::exp(-c * (smp[j].t - smp[first].t)) * z0 + cert.kappa2 * i_delta +
              cert.kappa3 * i_wdot;
      if (j < last || own_last) out.values[j] = value;
    }
    return value;
  };

  if (policy == RestartPolicy::per_arrival) {
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 1; i < count; ++i)
      if (smp[i].event != 0) starts.push_back(i);
    for (std::size_t k = 0; k < starts.size(); ++k) {
      BoundInterval iv;
      iv.first = starts[k];
      const bool closed = k + 1 < starts.size();
      iv.last = closed ? starts[k + 1] : count - 1;
      const auto eps = epsilon_condition(phi_err.at(smp[iv.first].phi_index), psi_err.at(smp[iv.first].psi_index), cert);
      iv.epsilon = eps.epsilon;
      iv.a = eps.a;
      if (!cert.gain_ok) {
        iv.reason = "gain condition fails";
      } else if (!eps.satisfied || eps.a <= 0.0) {
        iv.reason = "learning error at or above c0/c3";
      } else {
        iv.valid = true;
        const double end = sweep(iv.first, iv.last, eps.a, !closed);
        if (closed) iv.left_limit = end;
      }
      out.intervals.push_back(std::move(iv));
    }
    return out;
  }

  // Global: t₀ = 0 and the running sup error. The sup only grows at arrivals,
  // so a is piecewise constant; each segment reruns the envelope from t₀.
  double sup_phi = 0.0, sup_psi = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    sup_phi = std::max(sup_phi, phi_err.at(smp[i].phi_index));
    sup_psi = std::max(sup_psi, psi_err.at(smp[i].psi_index));
    const auto eps = epsilon_condition(sup_phi, sup_psi, cert);
    if (out.intervals.empty() || eps.epsilon != out.intervals.back().epsilon) {
      if (!out.intervals.empty()) out.intervals.back().last = i - 1;
      BoundInterval iv;
      iv.first = i;
      iv.epsilon = eps.epsilon;
      iv.a = eps.a;
      iv.valid = cert.gain_ok && eps.satisfied && eps.a > 0.0;
      if (!cert.gain_ok) iv.reason = "gain condition fails";
      else if (!iv.valid) iv.reason = "learning error at or above c0/c3";
      out.intervals.push_back(std::move(iv));
    }
  }
  out.intervals.back().last = count - 1;
  for (const BoundInterval& iv : out.intervals) {
    if (!iv.valid) continue;
    const std::vector<std::optional<double>> kept(out.values.begin(), out.values.begin() + iv.first);
    sweep(0, iv.last, iv.a, true);
    std::copy(kept.begin(), kept.end(), out.values.begin());
  }
  return out;
}

double iss_asymptote(const Certificate& cert, double a, double sup_delta, double sup_wdot) {
  if (!(a > 0.0)) throw Error(ErrorKind::certificate_invalid, "decay rate a must be positive");
  return 2.0 / a * (cert.kappa2 * sup_delta + cert.kappa3 * sup_wdot);
}

}  // namespace gradflow
