#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gradflow/common.hpp"

namespace gradflow {

enum class BasisKind { quadratic, sine, custom };

/// A finite family of scalar functions b(u) = (b_1(u), …, b_N(u)) on ℝ^dim,
/// with its N × dim Jacobian. A cost built on it is b(u)ᵀα.
class BasisSet {
 public:
  using Evaluator = std::function<Vector(const Vector&)>;
  using Jacobian = std::function<Matrix(const Vector&)>;
  /// Lipschitz constant of u ↦ ∇b(u)ᵀα for given coefficients α, when known
  /// analytically for the family.
  using GradientLipschitz = std::function<double(const Vector&)>;

  BasisSet(Eigen::Index dim, Eigen::Index count, Evaluator eval, Jacobian jac,
           BasisKind kind = BasisKind::custom, GradientLipschitz lipschitz = {});

  Eigen::Index dim() const { return dim_; }
  Eigen::Index count() const { return count_; }
  BasisKind kind() const { return kind_; }

  Vector evaluate(const Vector& point) const;
  Matrix jacobian(const Vector& point) const;

  /// b(point)ᵀ coeffs
  double value(const Vector& coeffs, const Vector& point) const;
  /// ∇b(point)ᵀ coeffs
  Vector gradient(const Vector& coeffs, const Vector& point) const;

  std::optional<double> gradient_lipschitz(const Vector& coeffs) const;

 private:
  Eigen::Index dim_;
  Eigen::Index count_;
  Evaluator eval_;
  Jacobian jac_;
  BasisKind kind_;
  GradientLipschitz lipschitz_;
};

/// Quadratic basis on ℝ^m, N = 1 + m + m(m+1)/2, ordered as
///   1, u_1 … u_m, then the upper triangle row by row:
///   u_i²/2 on the diagonal and u_i·u_j for i < j.
/// For m = 2 this is (1, u1, u2, u1²/2, u1·u2, u2²/2).
BasisSet quadratic_basis(Eigen::Index m);

Eigen::Index quadratic_basis_size(Eigen::Index m);

/// (sin u_1, …, sin u_m). Used for smooth truncation tails; its gradient is
/// Lipschitz with constant max |coeff_i|.
BasisSet sine_basis(Eigen::Index m);

/// φ(u) = ½ uᵀ Υ u + υᵀ u + r
struct QuadraticCost {
  Matrix curvature;  // Υ
  Vector linear;     // υ
  double offset = 0.0;

  double value(const Vector& u) const;
  Vector gradient(const Vector& u) const;
};

/// Coefficients of `cost` in quadratic_basis(m). Υ must be symmetric.
Vector pack_quadratic(const QuadraticCost& cost);
QuadraticCost unpack_quadratic(const Vector& alpha, Eigen::Index m);

/// ∇φ̂(u) = ∇b(u)ᵀ α̂
Vector grad_phi_hat(const BasisSet& basis, const Vector& alpha_hat, const Vector& u);
/// ∇ψ̂(y) = ∇d(y)ᵀ ρ̂
Vector grad_psi_hat(const BasisSet& basis, const Vector& rho_hat, const Vector& y);

}  // namespace gradflow
