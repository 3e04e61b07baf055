#pragma once

#include "gradflow/common.hpp"

namespace gradflow {

struct HurwitzCheck {
  bool stable = false;
  /// Largest real part over the spectrum; negative means stable.
  double margin = 0.0;
};

/// Strict check: stable iff every eigenvalue has real part < 0.
HurwitzCheck validate_hurwitz(const Matrix& a);

/// Solves Aᵀ P + P A = −Q through the Kronecker-sum system
/// (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = −vec(Q). Fine for the small n this library
/// targets (the system is n² × n²).
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Continuous-time plant  ẋ = A x + B u + E w,  y = C x + D w.
class PlantModel {
 public:
  PlantModel(Matrix a, Matrix b, Matrix c, Matrix d, Matrix e);

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }
  const Matrix& c() const { return c_; }
  const Matrix& d() const { return d_; }
  const Matrix& e() const { return e_; }

  Eigen::Index n() const { return a_.rows(); }
  Eigen::Index m() const { return b_.cols(); }
  Eigen::Index p() const { return c_.rows(); }
  Eigen::Index q() const { return d_.cols(); }

  Vector rhs(const Vector& x, const Vector& u, const Vector& w) const;
  Vector output(const Vector& x, const Vector& w) const;

 private:
  Matrix a_, b_, c_, d_, e_;
};

/// Equilibrium maps of a Hurwitz plant. Holds the factorization of A so every
/// equilibrium computation reuses it.
class SteadyStateMaps {
 public:
  explicit SteadyStateMaps(const PlantModel& plant);

  /// y_eq = G u + H w
  const Matrix& g() const { return g_; }
  const Matrix& h() const { return h_; }
  /// A⁻¹B and A⁻¹E, both needed by the certificate norms.
  const Matrix& a_inv_b() const { return a_inv_b_; }
  const Matrix& a_inv_e() const { return a_inv_e_; }

  /// x_eq = −A⁻¹(B u + E w)
  Vector equilibrium_state(const Vector& u, const Vector& w) const;
  Vector steady_output(const Vector& u, const Vector& w) const;

 private:
  Eigen::FullPivLU<Matrix> lu_;
  Matrix g_, h_, a_inv_b_, a_inv_e_;
};

SteadyStateMaps steady_state_maps(const PlantModel& plant);

/// P solving AᵀP + PA = −Q together with its spectrum bounds.
struct LyapunovCertificate {
  Matrix q;
  Matrix p;
  double lambda_min_q = 0.0;
  double lambda_min_p = 0.0;
  double lambda_max_p = 0.0;
};

LyapunovCertificate make_lyapunov_certificate(const Matrix& a, const Matrix& q);

/// max |AᵀP + PA + Q|
double lyapunov_residual(const Matrix& a, const Matrix& p, const Matrix& q);

}  // namespace gradflow
