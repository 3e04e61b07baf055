#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gradflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  dimension,
  precondition,
  singular,
  no_solution,
  convexity,
  non_convergence,
  rank,
  state,
  divergence,
  certificate_invalid,
  degenerate_coupling,
  config,
};

const char* to_string(ErrorKind kind);

/// Every failure in the library is reported through this exception; `kind()`
/// tells callers which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Largest absolute entry, 0 for empty matrices.
inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Spectral norm (largest singular value).
double spectral_norm(const Matrix& m);

/// Eigenvalues of the symmetric part of `m`, ascending.
Vector symmetric_eigenvalues(const Matrix& m);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

void require_dims(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& name);
void require_size(const Vector& v, Eigen::Index size, const std::string& name);

}  // namespace gradflow
