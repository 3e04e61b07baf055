#include "gradflow/cost_model.hpp"

#include <cmath>

namespace gradflow {

namespace {

void check_tail(const std::optional<TruncationTail>& tail, Eigen::Index dim, const char* name) {
  if (!tail) return;
  require(tail->basis.dim() == dim, ErrorKind::dimension,
          std::string(name) + " tail acts on dimension " + std::to_string(tail->basis.dim()) +
              ", expected " + std::to_string(dim));
  require_size(tail->coefficients, tail->basis.count(), std::string(name) + " tail coefficients");
}

double tail_lipschitz(const std::optional<TruncationTail>& tail, const char* name) {
  if (!tail) return 0.0;
  const auto l = tail->basis.gradient_lipschitz(tail->coefficients);
  require(l.has_value(), ErrorKind::precondition,
          std::string(name) + " tail has no analytic gradient-Lipschitz constant; supply constants");
  return *l;
}

// Constant Hessian and the gradient at u = 0 of the all-quadratic composite.
struct QuadraticModel {
  Matrix hessian;
  Vector gradient_at_zero;
};

QuadraticModel quadratic_model(const CompositeCost& cost, const Vector& w) {
  const QuadraticCost phi = unpack_quadratic(cost.alpha(), cost.m());
  const QuadraticCost psi = unpack_quadratic(cost.rho(), cost.p());
  const Matrix& g = cost.g();
  return {phi.curvature + g.transpose() * psi.curvature * g,
          phi.linear + g.transpose() * (psi.curvature * (cost.h() * w) + psi.linear)};
}

}  // namespace

CompositeCost::CompositeCost(BasisSet phi_basis, Vector alpha, BasisSet psi_basis, Vector rho, Matrix g,
                             Matrix h, std::optional<TruncationTail> phi_tail,
                             std::optional<TruncationTail> psi_tail)
    : phi_basis_(std::move(phi_basis)),
      alpha_(std::move(alpha)),
      psi_basis_(std::move(psi_basis)),
      rho_(std::move(rho)),
      g_(std::move(g)),
      h_(std::move(h)),
      phi_tail_(std::move(phi_tail)),
      psi_tail_(std::move(psi_tail)) {
  require_size(alpha_, phi_basis_.count(), "alpha");
  require_size(rho_, psi_basis_.count(), "rho");
  require_dims(g_, psi_basis_.dim(), phi_basis_.dim(), "G");
  require(h_.rows() == psi_basis_.dim() && h_.cols() > 0, ErrorKind::dimension,
          "H must have " + std::to_string(psi_basis_.dim()) + " rows");
  check_tail(phi_tail_, m(), "phi");
  check_tail(psi_tail_, p(), "psi");
}

double CompositeCost::phi(const Vector& u) const {
  double v = phi_basis_.value(alpha_, u);
  if (phi_tail_) v += phi_tail_->value(u);
  return v;
}

double CompositeCost::psi(const Vector& y) const {
  double v = psi_basis_.value(rho_, y);
  if (psi_tail_) v += psi_tail_->value(y);
  return v;
}

Vector CompositeCost::grad_phi_tail(const Vector& u) const {
  require_size(u, m(), "u");
  return phi_tail_ ? phi_tail_->gradient(u) : Vector(Vector::Zero(m()));
}

Vector CompositeCost::grad_psi_tail(const Vector& y) const {
  require_size(y, p(), "y");
  return psi_tail_ ? psi_tail_->gradient(y) : Vector(Vector::Zero(p()));
}

Vector CompositeCost::grad_phi(const Vector& u) const {
  return phi_basis_.gradient(alpha_, u) + grad_phi_tail(u);
}

Vector CompositeCost::grad_psi(const Vector& y) const {
  return psi_basis_.gradient(rho_, y) + grad_psi_tail(y);
}

double CompositeCost::value(const Vector& u, const Vector& w) const {
  require_size(w, q(), "w");
  return phi(u) + psi(steady_output(u, w));
}

bool CompositeCost::is_quadratic() const {
  return phi_basis_.kind() == BasisKind::quadratic && psi_basis_.kind() == BasisKind::quadratic &&
         !has_truncation();
}

Vector composite_gradient(const CompositeCost& cost, const Vector& u, const Vector& w) {
  require_size(u, cost.m(), "u");
  require_size(w, cost.q(), "w");
  return cost.grad_phi(u) + cost.g().transpose() * cost.grad_psi(cost.steady_output(u, w));
}

SmoothnessConstants smoothness_constants(const CompositeCost& cost,
                                         const std::optional<SmoothnessConstants>& user) {
  const double g_norm = spectral_norm(cost.g());
  if (user) {
    SmoothnessConstants c = *user;
    require(c.ell_u >= 0.0 && c.ell_y >= 0.0, ErrorKind::precondition,
            "smoothness constants must be nonnegative");
    c.ell = c.ell_u + g_norm * g_norm * c.ell_y;
    if (!c.truncated) {
      c.ell_u_n = c.ell_u;
      c.ell_y_m = c.ell_y;
      c.ell_u_e = c.ell_y_e = 0.0;
    }
    require(c.mu_u > 0.0, ErrorKind::convexity, "mu_u must be positive");
    require(c.mu_u <= c.ell * (1.0 + 1e-12), ErrorKind::precondition, "mu_u exceeds ell");
    return c;
  }

  require(cost.phi_basis().kind() == BasisKind::quadratic && cost.psi_basis().kind() == BasisKind::quadratic,
          ErrorKind::precondition, "analytic smoothness constants need quadratic bases; supply constants");
  const QuadraticCost phi = unpack_quadratic(cost.alpha(), cost.m());
  const QuadraticCost psi = unpack_quadratic(cost.rho(), cost.p());

  SmoothnessConstants c;
  c.truncated = cost.has_truncation();
  c.ell_u_n = symmetric_eigenvalues(phi.curvature).maxCoeff();
  c.ell_y_m = symmetric_eigenvalues(psi.curvature).maxCoeff();
  c.ell_u_e = tail_lipschitz(cost.phi_tail(), "phi");
  c.ell_y_e = tail_lipschitz(cost.psi_tail(), "psi");
  c.ell_u = std::max(0.0, c.ell_u_n) + c.ell_u_e;
  c.ell_y = std::max(0.0, c.ell_y_m) + c.ell_y_e;
  c.ell = c.ell_u + g_norm * g_norm * c.ell_y;

  const Matrix hessian = phi.curvature + cost.g().transpose() * psi.curvature * cost.g();
  c.mu_u = symmetric_eigenvalues(hessian)(0) - c.ell_u_e - g_norm * g_norm * c.ell_y_e;
  if (c.mu_u <= 0.0) {
    throw Error(ErrorKind::convexity,
                "composite cost is not strongly convex (mu_u = " + std::to_string(c.mu_u) + ")");
  }
  return c;
}

Vector optimizer_oracle(const CompositeCost& cost, const Vector& w, const OracleOptions& options) {
  require_size(w, cost.q(), "w");
  require(options.tol > 0.0, ErrorKind::precondition, "oracle tolerance must be positive");

  OracleMethod method = options.method;
  if (method == OracleMethod::automatic) {
    method = cost.is_quadratic() ? OracleMethod::closed_form : OracleMethod::gradient_descent;
  }

  if (method == OracleMethod::closed_form) {
    require(cost.is_quadratic(), ErrorKind::precondition,
            "closed-form oracle needs quadratic bases without truncation tails");
    const QuadraticModel model = quadratic_model(cost, w);
    Eigen::LLT<Matrix> llt(model.hessian);
    if (llt.info() != Eigen::Success || symmetric_eigenvalues(model.hessian)(0) <= 0.0) {
      throw Error(ErrorKind::convexity, "composite Hessian is not positive-definite");
    }
    Vector u = -llt.solve(model.gradient_at_zero);
    // One Newton refinement absorbs the solve's rounding.
    u -= llt.solve(composite_gradient(cost, u, w));
    return u;
  }

  double ell = 0.0;
  if (options.smoothness) {
    ell = *options.smoothness;
  } else {
    ell = smoothness_constants(cost).ell;
  }
  require(ell > 0.0 && std::isfinite(ell), ErrorKind::precondition, "gradient descent needs ell > 0");
  const double step = 1.0 / ell;

  Vector u = options.warm_start ? *options.warm_start : Vector(Vector::Zero(cost.m()));
  require_size(u, cost.m(), "warm start");
  Vector grad = composite_gradient(cost, u, w);
  const double blowup = 1e8 * (1.0 + grad.norm());
  for (long it = 0; it < options.max_iterations; ++it) {
    const double gnorm = grad.norm();
    if (gnorm <= options.tol) return u;
    if (!std::isfinite(gnorm) || gnorm > blowup) {
      throw Error(ErrorKind::convexity, "gradient descent is not contracting; cost is not strongly convex");
    }
    u -= step * grad;
    grad = composite_gradient(cost, u, w);
  }
  throw Error(ErrorKind::non_convergence, "gradient descent hit the iteration cap (gradient norm " +
                                              std::to_string(grad.norm()) + ")");
}

bool check_pl(const CompositeCost& cost, const Vector& w, const Vector& u, double mu_u, double tol,
              const Vector& u_star) {
  const double lhs = composite_gradient(cost, u, w).squaredNorm();
  const double gap = cost.value(u, w) - cost.value(u_star, w);
  return lhs + tol >= 2.0 * mu_u * gap;
}

}  // namespace gradflow
