#include "gradflow/learning.hpp"

#include <algorithm>
#include <cmath>

namespace gradflow {

Dataset::Dataset(BasisSet basis) : basis_(std::move(basis)) {}

void Dataset::append(EvaluationRecord record) {
  require(record.t >= 0.0, ErrorKind::precondition, "evaluation time must be nonnegative");
  require(std::isfinite(record.value), ErrorKind::precondition, "evaluation value must be finite");
  rows_.push_back(basis_.evaluate(record.point));
  records_.push_back(std::move(record));
}

Matrix Dataset::regression_matrix() const {
  Matrix b(size(), basis_.count());
  for (Eigen::Index k = 0; k < size(); ++k) b.row(k) = rows_[static_cast<size_t>(k)].transpose();
  return b;
}

Vector Dataset::targets() const {
  Vector y(size());
  for (Eigen::Index k = 0; k < size(); ++k) y(k) = records_[static_cast<size_t>(k)].value;
  return y;
}

LeastSquaresFit fit_ls(const Matrix& regression, const Vector& targets) {
  require(regression.rows() >= 1, ErrorKind::precondition, "least squares needs at least one record");
  require_size(targets, regression.rows(), "targets");
  Eigen::JacobiSVD<Matrix> svd(regression, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double cutoff = 1e-12 * (sigma.size() > 0 ? sigma(0) : 0.0);

  LeastSquaresFit fit;
  fit.estimate = Vector::Zero(regression.cols());
  Vector projected = Vector::Zero(regression.rows());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) <= cutoff || sigma(i) == 0.0) break;
    const double coeff = svd.matrixU().col(i).dot(targets);
    fit.estimate += (coeff / sigma(i)) * svd.matrixV().col(i);
    projected += coeff * svd.matrixU().col(i);
    ++fit.rank;
  }
  fit.residual = (targets - projected).squaredNorm();
  return fit;
}

LeastSquaresFit fit_ls(const Dataset& data) {
  require(!data.empty(), ErrorKind::precondition, "least squares needs at least one record");
  return fit_ls(data.regression_matrix(), data.targets());
}

Vector fit_ridge(const Matrix& regression, const Vector& targets, double lambda) {
  require(lambda > 0.0, ErrorKind::precondition, "ridge parameter must be positive");
  require_size(targets, regression.rows(), "targets");
  const Eigen::Index n = regression.cols();
  const Matrix normal = regression.transpose() * regression + lambda * Matrix::Identity(n, n);
  return Eigen::LLT<Matrix>(normal).solve(regression.transpose() * targets);
}

Vector fit_ridge(const Dataset& data, double lambda) {
  return fit_ridge(data.regression_matrix(), data.targets(), lambda);
}

Vector soft_threshold(const Vector& z, double lambda) {
  require(lambda >= 0.0, ErrorKind::precondition, "threshold must be nonnegative");
  Vector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double mag = std::max(std::abs(z(i)) - lambda, 0.0);
    out(i) = z(i) > 0.0 ? mag : (z(i) < 0.0 ? -mag : 0.0);
  }
  return out;
}

Vector fit_lasso(const Matrix& regression, const Vector& targets, double lambda) {
  require(lambda >= 0.0, ErrorKind::precondition, "lasso parameter must be nonnegative");
  require_size(targets, regression.rows(), "targets");
  const Eigen::Index n = regression.cols();
  if (regression.rows() < n) {
    throw Error(ErrorKind::rank, "lasso needs at least N records (have " + std::to_string(regression.rows()) +
                                     ", N = " + std::to_string(n) + ")");
  }
  Eigen::JacobiSVD<Matrix> svd(regression);
  const Vector& sigma = svd.singularValues();
  if (sigma(n - 1) <= 1e-12 * sigma(0)) throw Error(ErrorKind::rank, "BᵀB is singular");
  const Matrix normal = regression.transpose() * regression;
  const Vector z = Eigen::LLT<Matrix>(normal).solve(regression.transpose() * targets);
  return soft_threshold(z, lambda);
}

Vector fit_lasso(const Dataset& data, double lambda) {
  return fit_lasso(data.regression_matrix(), data.targets(), lambda);
}

RlsState rls_init(const Vector& initial, double covariance_scale) {
  require(covariance_scale > 0.0, ErrorKind::precondition, "RLS covariance scale must be positive");
  return {initial, covariance_scale * Matrix::Identity(initial.size(), initial.size())};
}

RlsState rls_update(const RlsState& state, const EvaluationRecord& record, const BasisSet& basis) {
  require_size(state.estimate, basis.count(), "RLS estimate");
  const Vector b = basis.evaluate(record.point);
  const Vector pb = state.covariance * b;
  const double denom = 1.0 + b.dot(pb);
  if (!(denom > 0.0)) throw Error(ErrorKind::state, "RLS covariance lost positive-definiteness; re-initialize");
  const Vector gain = pb / denom;

  RlsState next;
  next.estimate = state.estimate + gain * (record.value - b.dot(state.estimate));
  next.covariance = state.covariance - gain * pb.transpose();
  next.covariance = 0.5 * (next.covariance + next.covariance.transpose());
  Eigen::LLT<Matrix> llt(next.covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::state, "RLS covariance lost positive-definiteness; re-initialize");
  }
  return next;
}

double estimation_error(const Vector& estimate, const Vector& truth) {
  require_size(estimate, truth.size(), "estimate");
  return (estimate - truth).norm();
}

double running_sup_error(const std::vector<double>& history) {
  double sup = 0.0;
  for (double e : history) sup = std::max(sup, e);
  return sup;
}

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::ls: return "ls";
    case EstimatorKind::ridge: return "ridge";
    case EstimatorKind::lasso: return "lasso";
    case EstimatorKind::rls: return "rls";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& name) {
  for (auto kind : {EstimatorKind::ls, EstimatorKind::ridge, EstimatorKind::lasso, EstimatorKind::rls}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorKind::config, "unknown estimator '" + name + "' (expected ls, ridge, lasso or rls)");
}

OnlineLearner::OnlineLearner(BasisSet basis, EstimatorOptions options, Vector initial)
    : data_(std::move(basis)), options_(options) {
  require_size(initial, data_.basis().count(), "initial estimate");
  if (options_.kind == EstimatorKind::ridge) {
    require(options_.lambda > 0.0, ErrorKind::precondition, "ridge parameter must be positive");
  }
  if (options_.kind == EstimatorKind::lasso) {
    require(options_.lambda >= 0.0, ErrorKind::precondition, "lasso parameter must be nonnegative");
  }
  if (options_.kind == EstimatorKind::rls) rls_ = rls_init(initial, options_.covariance_scale);
  history_.push_back({std::move(initial), 0.0, options_.kind});
}

Vector OnlineLearner::refit() const {
  switch (options_.kind) {
    case EstimatorKind::ls: return fit_ls(data_).estimate;
    case EstimatorKind::ridge: return fit_ridge(data_, options_.lambda);
    case EstimatorKind::lasso: return fit_lasso(data_, options_.lambda);
    case EstimatorKind::rls: return rls_.estimate;
  }
  return {};
}

const ParameterEstimate& OnlineLearner::seed(const std::vector<EvaluationRecord>& records) {
  for (const auto& r : records) {
    EvaluationRecord rec = r;
    rec.t = 0.0;
    data_.append(rec);
    if (options_.kind == EstimatorKind::rls) rls_ = rls_update(rls_, rec, data_.basis());
  }
  if (data_.empty()) return current();
  // Seed data replace the initial guess rather than adding a change point.
  history_.back() = {refit(), 0.0, options_.kind};
  return current();
}

const ParameterEstimate& OnlineLearner::add(const EvaluationRecord& record) {
  require(record.t >= current().valid_from, ErrorKind::precondition, "arrivals must be time-ordered");
  data_.append(record);
  if (options_.kind == EstimatorKind::rls) rls_ = rls_update(rls_, record, data_.basis());
  history_.push_back({refit(), record.t, options_.kind});
  return current();
}

}  // namespace gradflow
