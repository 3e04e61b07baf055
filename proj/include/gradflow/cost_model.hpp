#pragma once

#include <optional>

#include "gradflow/basis.hpp"
#include "gradflow/common.hpp"

namespace gradflow {

/// A basis with fixed coefficients: the part of a cost expansion that the
/// controller never learns.
struct TruncationTail {
  BasisSet basis;
  Vector coefficients;

  double value(const Vector& point) const { return basis.value(coefficients, point); }
  Vector gradient(const Vector& point) const { return basis.gradient(coefficients, point); }
};

/// φ(u) + ψ(G u + H w) with φ(u) = b(u)ᵀα + e_φ(u) and ψ(y) = d(y)ᵀρ + e_ψ(y).
class CompositeCost {
 public:
  CompositeCost(BasisSet phi_basis, Vector alpha, BasisSet psi_basis, Vector rho, Matrix g, Matrix h,
                std::optional<TruncationTail> phi_tail = std::nullopt,
                std::optional<TruncationTail> psi_tail = std::nullopt);

  const BasisSet& phi_basis() const { return phi_basis_; }
  const BasisSet& psi_basis() const { return psi_basis_; }
  const Vector& alpha() const { return alpha_; }
  const Vector& rho() const { return rho_; }
  const Matrix& g() const { return g_; }
  const Matrix& h() const { return h_; }
  const std::optional<TruncationTail>& phi_tail() const { return phi_tail_; }
  const std::optional<TruncationTail>& psi_tail() const { return psi_tail_; }
  bool has_truncation() const { return phi_tail_.has_value() || psi_tail_.has_value(); }

  Eigen::Index m() const { return phi_basis_.dim(); }
  Eigen::Index p() const { return psi_basis_.dim(); }
  Eigen::Index q() const { return h_.cols(); }

  double phi(const Vector& u) const;
  double psi(const Vector& y) const;
  Vector grad_phi(const Vector& u) const;
  Vector grad_psi(const Vector& y) const;
  /// ∇e_φ(u), zero without a tail.
  Vector grad_phi_tail(const Vector& u) const;
  Vector grad_psi_tail(const Vector& y) const;

  Vector steady_output(const Vector& u, const Vector& w) const { return g_ * u + h_ * w; }
  double value(const Vector& u, const Vector& w) const;

  /// True when both bases are quadratic and there is no tail, so the
  /// composite Hessian is constant.
  bool is_quadratic() const;

 private:
  BasisSet phi_basis_;
  Vector alpha_;
  BasisSet psi_basis_;
  Vector rho_;
  Matrix g_, h_;
  std::optional<TruncationTail> phi_tail_;
  std::optional<TruncationTail> psi_tail_;
};

/// ∇φ(u) + Gᵀ∇ψ(G u + H w), tails included.
Vector composite_gradient(const CompositeCost& cost, const Vector& u, const Vector& w);

struct SmoothnessConstants {
  double ell_u = 0.0;
  double ell_y = 0.0;
  double ell = 0.0;  // ℓ_u + ‖G‖² ℓ_y
  double mu_u = 0.0;
  /// Smoothness of the learned (truncated) parts and Lipschitz constants of
  /// the tail gradients. Without a tail ell_u_n = ell_u, ell_y_m = ell_y and
  /// the tail constants are zero.
  double ell_u_n = 0.0;
  double ell_y_m = 0.0;
  double ell_u_e = 0.0;
  double ell_y_e = 0.0;
  bool truncated = false;
};

/// Analytic constants for quadratic bases (tails handled through their
/// gradient-Lipschitz constants):
///   ℓ_u = λ_max(Υ) + ℓ_uᵉ, ℓ_y = λ_max(Υ_ψ) + ℓ_yᵉ,
///   μ_u = λ_min(Υ + Gᵀ Υ_ψ G) − ℓ_uᵉ − ‖G‖² ℓ_yᵉ.
/// Other bases need `user`, which is passed through after the μ_u ≤ ℓ check.
SmoothnessConstants smoothness_constants(const CompositeCost& cost,
                                         const std::optional<SmoothnessConstants>& user = std::nullopt);

enum class OracleMethod { automatic, closed_form, gradient_descent };

struct OracleOptions {
  double tol = 1e-10;
  OracleMethod method = OracleMethod::automatic;
  long max_iterations = 1'000'000;
  /// Step 1/ℓ; required for gradient descent.
  std::optional<double> smoothness;
  std::optional<Vector> warm_start;
};

/// u*(w) = argmin φ(u) + ψ(G u + H w).
Vector optimizer_oracle(const CompositeCost& cost, const Vector& w, const OracleOptions& options = {});

/// ‖∇f(u)‖² + tol ≥ 2 μ_u (f(u) − f(u*)) for f = φ + ψ(G· + H w).
bool check_pl(const CompositeCost& cost, const Vector& w, const Vector& u, double mu_u, double tol,
              const Vector& u_star);

}  // namespace gradflow
