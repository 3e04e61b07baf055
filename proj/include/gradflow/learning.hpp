#pragma once

#include <vector>

#include "gradflow/basis.hpp"
#include "gradflow/common.hpp"

namespace gradflow {

/// One noisy functional evaluation. Recorded (seed) data carry t = 0.
struct EvaluationRecord {
  double t = 0.0;
  Vector point;
  double value = 0.0;
};

/// Evaluations of one cost term together with the regression rows b(point)ᵀ.
class Dataset {
 public:
  explicit Dataset(BasisSet basis);

  void append(EvaluationRecord record);

  const BasisSet& basis() const { return basis_; }
  const std::vector<EvaluationRecord>& records() const { return records_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(records_.size()); }
  bool empty() const { return records_.empty(); }

  /// K × N, row k = b(records[k].point)ᵀ
  Matrix regression_matrix() const;
  Vector targets() const;

 private:
  BasisSet basis_;
  std::vector<EvaluationRecord> records_;
  std::vector<Vector> rows_;
};

struct LeastSquaresFit {
  Vector estimate;
  /// ‖(I − B B†) Φ̂‖²
  double residual = 0.0;
  Eigen::Index rank = 0;
};

/// α̂ = B† Φ̂ through the SVD with cutoff 1e-12·σ_max. Minimum-norm when K < N
/// or B is rank deficient.
LeastSquaresFit fit_ls(const Matrix& regression, const Vector& targets);
LeastSquaresFit fit_ls(const Dataset& data);

/// α̂ = (BᵀB + λI)⁻¹ Bᵀ Φ̂, λ > 0
Vector fit_ridge(const Matrix& regression, const Vector& targets, double lambda);
Vector fit_ridge(const Dataset& data, double lambda);

/// max(|z_i| − λ, 0)·sgn(z_i)
Vector soft_threshold(const Vector& z, double lambda);

/// z = (BᵀB)⁻¹BᵀΦ̂ followed by soft thresholding. This is the exact lasso
/// minimizer only when B has orthonormal columns.
Vector fit_lasso(const Matrix& regression, const Vector& targets, double lambda);
Vector fit_lasso(const Dataset& data, double lambda);

struct RlsState {
  Vector estimate;
  Matrix covariance;
};

RlsState rls_init(const Vector& initial, double covariance_scale);

/// k = P b / (1 + bᵀ P b),  α̂ ← α̂ + k (φ̂ − bᵀα̂),  P ← P − k bᵀ P
RlsState rls_update(const RlsState& state, const EvaluationRecord& record, const BasisSet& basis);

double estimation_error(const Vector& estimate, const Vector& truth);
double running_sup_error(const std::vector<double>& history);

enum class EstimatorKind { ls, ridge, lasso, rls };

const char* to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);

struct EstimatorOptions {
  EstimatorKind kind = EstimatorKind::ls;
  double lambda = 0.0;  // ridge and lasso
  double covariance_scale = 1e6;  // rls
};

/// Estimate held from `valid_from` until the next refit.
struct ParameterEstimate {
  Vector value;
  double valid_from = 0.0;
  EstimatorKind method = EstimatorKind::ls;
};

/// Streaming estimator for one cost term: keeps its own dataset and the
/// piecewise-constant history of estimates.
class OnlineLearner {
 public:
  OnlineLearner(BasisSet basis, EstimatorOptions options, Vector initial);

  /// Appends recorded data and refits once; the result is valid from t = 0.
  const ParameterEstimate& seed(const std::vector<EvaluationRecord>& records);
  /// Appends one arrival and refits.
  const ParameterEstimate& add(const EvaluationRecord& record);

  const ParameterEstimate& current() const { return history_.back(); }
  const std::vector<ParameterEstimate>& history() const { return history_; }
  const Dataset& dataset() const { return data_; }
  const EstimatorOptions& options() const { return options_; }

 private:
  Vector refit() const;

  Dataset data_;
  EstimatorOptions options_;
  RlsState rls_;
  std::vector<ParameterEstimate> history_;
};

}  // namespace gradflow
