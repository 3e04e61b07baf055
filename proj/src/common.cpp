#include "gradflow/common.hpp"

namespace gradflow {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::precondition: return "precondition error";
    case ErrorKind::singular: return "singularity error";
    case ErrorKind::no_solution: return "no-solution error";
    case ErrorKind::convexity: return "convexity error";
    case ErrorKind::non_convergence: return "non-convergence error";
    case ErrorKind::rank: return "rank error";
    case ErrorKind::state: return "state error";
    case ErrorKind::divergence: return "divergence error";
    case ErrorKind::certificate_invalid: return "certificate-invalid error";
    case ErrorKind::degenerate_coupling: return "degenerate-output-coupling error";
    case ErrorKind::config: return "config error";
  }
  return "error";
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

Vector symmetric_eigenvalues(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

void require_dims(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorKind::dimension, name + " is " + std::to_string(m.rows()) + "x" +
                                          std::to_string(m.cols()) + ", expected " +
                                          std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void require_size(const Vector& v, Eigen::Index size, const std::string& name) {
  if (v.size() != size) {
    throw Error(ErrorKind::dimension, name + " has length " + std::to_string(v.size()) +
                                          ", expected " + std::to_string(size));
  }
}

}  // namespace gradflow
