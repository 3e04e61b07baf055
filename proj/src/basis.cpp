#include "gradflow/basis.hpp"

#include <cmath>

namespace gradflow {

BasisSet::BasisSet(Eigen::Index dim, Eigen::Index count, Evaluator eval, Jacobian jac,
                   BasisKind kind, GradientLipschitz lipschitz)
    : dim_(dim),
      count_(count),
      eval_(std::move(eval)),
      jac_(std::move(jac)),
      kind_(kind),
      lipschitz_(std::move(lipschitz)) {
  require(dim_ > 0 && count_ > 0, ErrorKind::precondition, "basis dimension and count must be positive");
  require(static_cast<bool>(eval_) && static_cast<bool>(jac_), ErrorKind::precondition,
          "basis needs an evaluator and a Jacobian");
}

Vector BasisSet::evaluate(const Vector& point) const {
  require_size(point, dim_, "basis point");
  return eval_(point);
}

Matrix BasisSet::jacobian(const Vector& point) const {
  require_size(point, dim_, "basis point");
  return jac_(point);
}

double BasisSet::value(const Vector& coeffs, const Vector& point) const {
  require_size(coeffs, count_, "basis coefficients");
  return evaluate(point).dot(coeffs);
}

Vector BasisSet::gradient(const Vector& coeffs, const Vector& point) const {
  require_size(coeffs, count_, "basis coefficients");
  return jacobian(point).transpose() * coeffs;
}

std::optional<double> BasisSet::gradient_lipschitz(const Vector& coeffs) const {
  require_size(coeffs, count_, "basis coefficients");
  if (!lipschitz_) return std::nullopt;
  return lipschitz_(coeffs);
}

Eigen::Index quadratic_basis_size(Eigen::Index m) { return 1 + m + m * (m + 1) / 2; }

BasisSet quadratic_basis(Eigen::Index m) {
  require(m >= 1, ErrorKind::precondition, "quadratic basis needs m >= 1");
  const Eigen::Index count = quadratic_basis_size(m);

  auto eval = [m, count](const Vector& u) {
    Vector b(count);
    b(0) = 1.0;
    b.segment(1, m) = u;
    Eigen::Index k = 1 + m;
    for (Eigen::Index i = 0; i < m; ++i) {
      b(k++) = 0.5 * u(i) * u(i);
      for (Eigen::Index j = i + 1; j < m; ++j) b(k++) = u(i) * u(j);
    }
    return b;
  };
  auto jac = [m, count](const Vector& u) {
    Matrix jb = Matrix::Zero(count, m);
    jb.block(1, 0, m, m).setIdentity();
    Eigen::Index k = 1 + m;
    for (Eigen::Index i = 0; i < m; ++i) {
      jb(k++, i) = u(i);
      for (Eigen::Index j = i + 1; j < m; ++j) {
        jb(k, i) = u(j);
        jb(k, j) = u(i);
        ++k;
      }
    }
    return jb;
  };
  auto lipschitz = [m](const Vector& alpha) {
    return spectral_norm(unpack_quadratic(alpha, m).curvature);
  };
  return BasisSet(m, count, eval, jac, BasisKind::quadratic, lipschitz);
}

BasisSet sine_basis(Eigen::Index m) {
  require(m >= 1, ErrorKind::precondition, "sine basis needs m >= 1");
  auto eval = [](const Vector& u) -> Vector { return u.array().sin().matrix(); };
  auto jac = [](const Vector& u) -> Matrix { return u.array().cos().matrix().asDiagonal(); };
  auto lipschitz = [](const Vector& coeffs) { return coeffs.cwiseAbs().maxCoeff(); };
  return BasisSet(m, m, eval, jac, BasisKind::sine, lipschitz);
}

double QuadraticCost::value(const Vector& u) const {
  return 0.5 * u.dot(curvature * u) + linear.dot(u) + offset;
}

Vector QuadraticCost::gradient(const Vector& u) const { return curvature * u + linear; }

Vector pack_quadratic(const QuadraticCost& cost) {
  const Eigen::Index m = cost.curvature.rows();
  require(m >= 1, ErrorKind::precondition, "quadratic cost needs m >= 1");
  require_dims(cost.curvature, m, m, "Upsilon");
  require_size(cost.linear, m, "upsilon");
  const double scale = std::max(1.0, max_abs(cost.curvature));
  require(max_abs(cost.curvature - cost.curvature.transpose()) <= 1e-12 * scale,
          ErrorKind::precondition, "Upsilon must be symmetric");

  Vector alpha(quadratic_basis_size(m));
  alpha(0) = cost.offset;
  alpha.segment(1, m) = cost.linear;
  Eigen::Index k = 1 + m;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      // u_i·u_j carries both Υ_ij and Υ_ji, each with weight ½.
      alpha(k++) = i == j ? cost.curvature(i, i) : 0.5 * (cost.curvature(i, j) + cost.curvature(j, i));
    }
  }
  return alpha;
}

QuadraticCost unpack_quadratic(const Vector& alpha, Eigen::Index m) {
  require(m >= 1, ErrorKind::precondition, "quadratic cost needs m >= 1");
  require_size(alpha, quadratic_basis_size(m), "alpha");
  QuadraticCost cost;
  cost.offset = alpha(0);
  cost.linear = alpha.segment(1, m);
  cost.curvature = Matrix::Zero(m, m);
  Eigen::Index k = 1 + m;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      cost.curvature(i, j) = alpha(k);
      cost.curvature(j, i) = alpha(k);
      ++k;
    }
  }
  return cost;
}

Vector grad_phi_hat(const BasisSet& basis, const Vector& alpha_hat, const Vector& u) {
  return basis.gradient(alpha_hat, u);
}

Vector grad_psi_hat(const BasisSet& basis, const Vector& rho_hat, const Vector& y) {
  return basis.gradient(rho_hat, y);
}

}  // namespace gradflow
