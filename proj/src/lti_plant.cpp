#include "gradflow/lti_plant.hpp"

#include <algorithm>
#include <cmath>

namespace gradflow {

namespace {

void require_square(const Matrix& m, const std::string& name) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::dimension, name + " must be square, got " + std::to_string(m.rows()) +
                                          "x" + std::to_string(m.cols()));
  }
}

bool is_spd(const Matrix& q) {
  const double scale = std::max(1.0, max_abs(q));
  if (max_abs(q - q.transpose()) > 1e-12 * scale) return false;
  Eigen::LLT<Matrix> llt(q);
  return llt.info() == Eigen::Success;
}

}  // namespace

HurwitzCheck validate_hurwitz(const Matrix& a) {
  require_square(a, "A");
  require(a.rows() > 0, ErrorKind::dimension, "A must be non-empty");
  Eigen::EigenSolver<Matrix> solver(a, false);
  const double margin = solver.eigenvalues().real().maxCoeff();
  return {margin < 0.0, margin};
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  require_square(a, "A");
  require_dims(q, a.rows(), a.cols(), "Q");
  require(is_spd(q), ErrorKind::precondition, "Q must be symmetric positive-definite");
  const HurwitzCheck hurwitz = validate_hurwitz(a);
  if (!hurwitz.stable) {
    throw Error(ErrorKind::no_solution,
                "A is not Hurwitz (max real part " + std::to_string(hurwitz.margin) + ")");
  }

  const Eigen::Index n = a.rows();
  const Matrix at = a.transpose();
  const Matrix identity = Matrix::Identity(n, n);
  // Column-major vec: vec(AᵀP) = (I ⊗ Aᵀ) vec(P), vec(PA) = (Aᵀ ⊗ I) vec(P).
  Matrix kron_sum = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron_sum.block(i * n, j * n, n, n) += identity(i, j) * at;
      kron_sum.block(i * n, j * n, n, n) += at(i, j) * identity;
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  Eigen::FullPivLU<Matrix> lu(kron_sum);
  if (!lu.isInvertible()) throw Error(ErrorKind::no_solution, "Kronecker-sum system is singular");
  const Vector vec_p = lu.solve(rhs);

  Matrix p = Eigen::Map<const Matrix>(vec_p.data(), n, n);
  p = 0.5 * (p + p.transpose());
  if (symmetric_eigenvalues(p)(0) <= 0.0) {
    throw Error(ErrorKind::no_solution, "Lyapunov solution is not positive-definite");
  }
  return p;
}

double lyapunov_residual(const Matrix& a, const Matrix& p, const Matrix& q) {
  return max_abs(a.transpose() * p + p * a + q);
}

LyapunovCertificate make_lyapunov_certificate(const Matrix& a, const Matrix& q) {
  LyapunovCertificate cert;
  cert.q = q;
  cert.p = solve_lyapunov(a, q);
  cert.lambda_min_q = symmetric_eigenvalues(q)(0);
  const Vector eig_p = symmetric_eigenvalues(cert.p);
  cert.lambda_min_p = eig_p(0);
  cert.lambda_max_p = eig_p(eig_p.size() - 1);
  return cert;
}

PlantModel::PlantModel(Matrix a, Matrix b, Matrix c, Matrix d, Matrix e)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)), e_(std::move(e)) {
  require_square(a_, "A");
  require(a_.rows() > 0, ErrorKind::dimension, "A must be non-empty");
  require(b_.cols() > 0 && c_.rows() > 0 && d_.cols() > 0, ErrorKind::dimension,
          "m, p and q must be positive");
  const Eigen::Index n = a_.rows();
  require_dims(b_, n, b_.cols(), "B");
  require_dims(c_, c_.rows(), n, "C");
  require_dims(d_, c_.rows(), d_.cols(), "D");
  require_dims(e_, n, d_.cols(), "E");
}

Vector PlantModel::rhs(const Vector& x, const Vector& u, const Vector& w) const {
  require_size(x, n(), "x");
  require_size(u, m(), "u");
  require_size(w, q(), "w");
  return a_ * x + b_ * u + e_ * w;
}

Vector PlantModel::output(const Vector& x, const Vector& w) const {
  require_size(x, n(), "x");
  require_size(w, q(), "w");
  return c_ * x + d_ * w;
}

SteadyStateMaps::SteadyStateMaps(const PlantModel& plant) : lu_(plant.a()) {
  if (!lu_.isInvertible()) throw Error(ErrorKind::singular, "A is singular");
  a_inv_b_ = lu_.solve(plant.b());
  a_inv_e_ = lu_.solve(plant.e());
  const double scale_b = std::max(1.0, std::max(max_abs(plant.a()) * max_abs(a_inv_b_), max_abs(plant.b())));
  const double scale_e = std::max(1.0, std::max(max_abs(plant.a()) * max_abs(a_inv_e_), max_abs(plant.e())));
  if (max_abs(plant.a() * a_inv_b_ - plant.b()) > 1e-10 * scale_b ||
      max_abs(plant.a() * a_inv_e_ - plant.e()) > 1e-10 * scale_e) {
    throw Error(ErrorKind::singular, "A is numerically singular (inverse residual too large)");
  }
  g_ = -plant.c() * a_inv_b_;
  h_ = plant.d() - plant.c() * a_inv_e_;
}

Vector SteadyStateMaps::equilibrium_state(const Vector& u, const Vector& w) const {
  require_size(u, a_inv_b_.cols(), "u");
  require_size(w, a_inv_e_.cols(), "w");
  return -(a_inv_b_ * u + a_inv_e_ * w);
}

Vector SteadyStateMaps::steady_output(const Vector& u, const Vector& w) const {
  require_size(u, g_.cols(), "u");
  require_size(w, h_.cols(), "w");
  return g_ * u + h_ * w;
}

SteadyStateMaps steady_state_maps(const PlantModel& plant) { return SteadyStateMaps(plant); }

}  // namespace gradflow
