#include "oracles.hpp"

#include <cmath>
#include <complex>

namespace oracle {

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x) {
  const double h = 1e-5 * (1.0 + x.norm());
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x) {
  const double h = 1e-5 * (1.0 + x.norm());
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    g(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x, double step) {
  const Eigen::Index n = x.size();
  Matrix hess(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      auto at = [&](double si, double sj) {
        Vector y = x;
        y(i) += si * step;
        y(j) += sj * step;
        return f(y);
      };
      hess(i, j) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * step * step);
    }
  }
  return hess;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Vector v(n);
  for (auto& e : v) e = dist(rng);
  return v;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Matrix random_hurwitz(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix m = random_matrix(rng, n, n, 2.0);
  const double norm = Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
  return m - (norm + 1.0) * Matrix::Identity(n, n);
}

Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double floor) {
  const Matrix m = random_matrix(rng, n, n);
  return m * m.transpose() + floor * Matrix::Identity(n, n);
}

Vector coordinate_descent_lasso(const Matrix& x, const Vector& y, double lambda, double tol, int max_sweeps) {
  const Eigen::Index n = x.cols();
  Vector beta = Vector::Zero(n);
  Vector residual = y;
  const Vector col_sq = x.colwise().squaredNorm().transpose();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double rho = x.col(j).dot(residual) + col_sq(j) * beta(j);
      double next = 0.0;
      if (rho > lambda) next = (rho - lambda) / col_sq(j);
      else if (rho < -lambda) next = (rho + lambda) / col_sq(j);
      const double d = next - beta(j);
      if (d != 0.0) {
        residual -= d * x.col(j);
        beta(j) = next;
        change = std::max(change, std::abs(d));
      }
    }
    if (change < tol) break;
  }
  return beta;
}

double proof_gain_limit(double s, double lambda_min_q, double pab_norm, double ell_y, double g_norm,
                        double c_norm) {
  const double a1 = 1.0 - s;
  const double a2 = (1.0 - s) * lambda_min_q;
  const double b1 = ell_y * g_norm * c_norm;
  const double b2 = 2.0 * pab_norm;
  return a1 * a2 / (b1 * b2 * (1.0 + a1));
}

Matrix lyapunov_by_eigenbasis(const Matrix& a, const Matrix& q) {
  using CMatrix = Eigen::MatrixXcd;
  Eigen::EigenSolver<Matrix> es(a);
  const CMatrix v = es.eigenvectors();
  const Eigen::VectorXcd lam = es.eigenvalues();
  const CMatrix rhs = v.transpose() * q.cast<std::complex<double>>() * v;
  CMatrix pt(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) pt(i, j) = -rhs(i, j) / (lam(i) + lam(j));
  const CMatrix v_inv = v.inverse();
  const Matrix p = (v_inv.transpose() * pt * v_inv).real();
  return 0.5 * (p + p.transpose());
}

namespace {

double two_norm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.transpose() * m);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace

ReferenceConstants reference_constants(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& e,
                                       const Matrix& q, const Matrix& upsilon, double eta, double s,
                                       double tail_u, double tail_y) {
  const Matrix a_inv = a.inverse();
  const Matrix g = -c * a_inv * b;
  const Matrix p = lyapunov_by_eigenbasis(a, q);
  Eigen::SelfAdjointEigenSolver<Matrix> eq(q), ep(p), eu(upsilon), eh(upsilon + g.transpose() * g);
  const double lq = eq.eigenvalues().minCoeff();
  const double lp_min = ep.eigenvalues().minCoeff(), lp_max = ep.eigenvalues().maxCoeff();
  const double g_norm = two_norm(g), c_norm = two_norm(c);
  const double pab = two_norm(p * a_inv * b), pae = two_norm(p.transpose() * a_inv * e);
  const double ell_u = eu.eigenvalues().maxCoeff() + tail_u;
  const double ell_y = 1.0 + tail_y;
  const double ell = ell_u + g_norm * g_norm * ell_y;
  const double mu = eh.eigenvalues().minCoeff() - tail_u - g_norm * g_norm * tail_y;

  ReferenceConstants r{};
  const double b1 = ell_y * g_norm * c_norm, b2 = 2.0 * pab;
  r.theta = b1 / (b1 + b2);
  r.eta_max = proof_gain_limit(s, lq, pab, ell_y, g_norm, c_norm);
  r.mu = mu;
  r.ell = ell;
  r.c0 = s * std::min(2.0 * mu * eta, lq / lp_max);
  // Undivided form: c₁η = min((1−θ)μ/2, θλ_min(P)).
  const double c1_eta = std::min((1.0 - r.theta) * mu / 2.0, r.theta * lp_min);
  r.c1 = c1_eta / eta;
  r.c2 = std::max((1.0 - r.theta) * ell / 2.0, r.theta * lp_max) / eta;
  r.c3 = eta * std::max(2.0 * ell / mu, 4.0 * pab / c1_eta);
  r.c4 = std::sqrt(eta) * std::max(ell * std::sqrt(2.0 / mu), 2.0 * pab / std::sqrt(lp_min));
  r.c5 = 2.0 * pae / std::sqrt(eta * lp_min);
  r.kappa1 = std::sqrt(r.c2 / r.c1);
  r.kappa2 = r.c4 / (2.0 * std::sqrt(r.c1));
  r.kappa3 = r.c5 / (2.0 * std::sqrt(r.c1));
  return r;
}

double constant_forcing_bound(double kappa1, double kappa2, double a, double z0, double delta, double t) {
  const double decay = std::exp(-a * t / 2.0);
  return kappa1 * decay * z0 + 2.0 * kappa2 / a * delta * (1.0 - decay);
}

}  // namespace oracle
