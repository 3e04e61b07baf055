#pragma once

#include <functional>
#include <random>

#include "gradflow/common.hpp"

// Independent reference computations used only by the tests.
namespace oracle {

using gradflow::Matrix;
using gradflow::Vector;

/// Central differences with step 1e-5·(1 + ‖x‖); rows = outputs.
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x);
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x);
/// Central second differences of a scalar function.
Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x, double step = 1e-4);

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0);
Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0);
/// M − (‖M‖ + 1)·I for a random M: always Hurwitz.
Matrix random_hurwitz(std::mt19937_64& rng, Eigen::Index n);
Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.1);

/// Cyclic coordinate descent for ½‖y − Xβ‖² + λ‖β‖₁.
Vector coordinate_descent_lasso(const Matrix& x, const Vector& y, double lambda, double tol = 1e-14,
                                int max_sweeps = 100000);

/// Gain limit written as in the proof: α₁α₂ / (β₁β₂(1 + α₁)).
double proof_gain_limit(double s, double lambda_min_q, double pab_norm, double ell_y, double g_norm,
                        double c_norm);

/// Solves AᵀP + PA = −Q in the eigenbasis of A (diagonalizable A only):
/// with A = VΛV⁻¹ and P̃ = VᵀPV, P̃_ij = −(VᵀQV)_ij / (λ_i + λ_j).
Matrix lyapunov_by_eigenbasis(const Matrix& a, const Matrix& q);

/// Certificate constants recomputed from raw matrices, using the algebraically
/// equivalent forms (η outside the max in c₃, θ via β₁/(β₁+β₂)).
struct ReferenceConstants {
  double theta, eta_max, c0, c1, c2, c3, c4, c5, kappa1, kappa2, kappa3, mu, ell;
};

/// φ curvature Υ, ψ = ½‖y − ξ‖² (identity curvature), tails given by their
/// gradient-Lipschitz constants.
ReferenceConstants reference_constants(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& e,
                                       const Matrix& q, const Matrix& upsilon, double eta, double s,
                                       double tail_u = 0.0, double tail_y = 0.0);

/// κ₁e^{−at/2}z₀ + (2κ₂/a)Δ̄(1 − e^{−at/2}) for constant Δ̄ and ẇ ≡ 0.
double constant_forcing_bound(double kappa1, double kappa2, double a, double z0, double delta, double t);

}  // namespace oracle
