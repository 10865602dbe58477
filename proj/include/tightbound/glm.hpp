#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tightbound/dataset.hpp"

namespace tightbound {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Softmax-link generalized linear model. Row k of the K x (d+1) weight matrix
/// scores class k; column d is the bias.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::uint32_t n_classes, std::uint32_t n_features);
  /// Throws NumericalError on non-finite entries.
  explicit ModelParams(Matrix weights);

  static ModelParams zeros_like(const Dataset& ds) { return {ds.n_classes, ds.n_features}; }

  const Matrix& weights() const { return weights_; }
  // Solver access. Callers are responsible for keeping entries finite.
  Matrix& mutable_weights() { return weights_; }

  std::uint32_t n_classes() const { return static_cast<std::uint32_t>(weights_.rows()); }
  std::uint32_t n_features() const { return static_cast<std::uint32_t>(weights_.cols() - 1); }

  bool all_finite() const { return weights_.allFinite(); }

  bool operator==(const ModelParams& other) const {
    return weights_.rows() == other.weights_.rows() && weights_.cols() == other.weights_.cols() &&
           weights_ == other.weights_;
  }

 private:
  Matrix weights_;
};

/// Text format: header line `K d`, then K rows of d+1 reals (17 significant
/// digits, so values round-trip exactly).
void write_params(std::ostream& out, const ModelParams& params);
ModelParams read_params(std::istream& in);
std::string params_to_string(const ModelParams& params);
ModelParams params_from_string(const std::string& text);

/// Snapshot p(y_i | x_i, theta_t) of the label probabilities under one
/// parameter value. Entries are in (0, 1] unless reward_scaled is set.
struct ImportanceWeights {
  std::vector<double> values;
  std::string source_tag;
  bool reward_scaled = false;

  void validate(std::size_t n) const;
};

/// Per-example, per-class coefficients c_iy of the objective
///   -(1/N) sum_i sum_y c_iy log p(y | x_i, theta) + (lambda / K) Omega(theta).
/// Importance weights are the special case c_iy = w_i [y == y_i]; reward
/// extensions fill several classes per row. All entries are nonnegative.
class ClassWeights {
 public:
  ClassWeights() = default;
  /// Throws std::invalid_argument on negative or non-finite entries.
  explicit ClassWeights(Matrix values);

  static ClassWeights from_importance(const ImportanceWeights& w, const Dataset& ds);
  static ClassWeights uniform_labels(const Dataset& ds, double value);

  const Matrix& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  std::uint32_t n_classes() const { return static_cast<std::uint32_t>(values_.cols()); }
  /// sum_y c_iy.
  double row_sum(std::size_t i) const { return row_sums_[static_cast<Eigen::Index>(i)]; }
  /// max_i sum_y c_iy, the curvature scale of the data term.
  double max_row_sum() const { return max_row_sum_; }

 private:
  Matrix values_;
  Eigen::VectorXd row_sums_;
  double max_row_sum_ = 0.0;
};

/// Linear scores W x~ for one row (x~ = x with an appended 1).
void class_scores(const ModelParams& params, const FeatureRow& row, std::span<double> out);

/// Numerically stable in-place softmax with max-score subtraction. Throws
/// NumericalError if any score is not finite.
void softmax_inplace(std::span<double> scores);

std::vector<double> predict_proba(const ModelParams& params, const FeatureRow& row);

/// argmax_y p(y | x); ties go to the smallest class index.
std::uint32_t predict_class(const ModelParams& params, const FeatureRow& row);

/// Probability matrix (N x K) for every row of a dataset.
Matrix predict_proba_all(const ModelParams& params, const Dataset& ds);

/// L_log = -(1/N) sum_i log p(y_i | x_i).
double nll(const ModelParams& params, const Dataset& ds);

/// L = 1 - (1/N) sum_i p(y_i | x_i): the error rate of a classifier that
/// samples its decision from p.
double expected_error(const ModelParams& params, const Dataset& ds);

/// Omega = 1/2 sum of squared non-bias weights.
double l2_penalty(const ModelParams& params);

/// Importance-weighted log-loss plus (lambda / K) Omega.
double weighted_nll(const ModelParams& params, const Dataset& ds, const ImportanceWeights& w,
                    double lambda);
double weighted_nll(const ModelParams& params, const Dataset& ds, const ClassWeights& c, double lambda);

/// Exact gradient of weighted_nll. With a non-empty subset, the data term is
/// averaged over the subset only (1/|subset|).
Matrix grad_weighted_nll(const ModelParams& params, const Dataset& ds, const ImportanceWeights& w,
                         double lambda, std::span<const std::size_t> subset = {});
Matrix grad_weighted_nll(const ModelParams& params, const Dataset& ds, const ClassWeights& c,
                         double lambda, std::span<const std::size_t> subset = {});

/// Adds sum_{i in rows} grad_theta [-sum_y c_iy log p(y | x_i)] into `acc`
/// (unnormalized, no penalty). `scratch` must hold K doubles.
void accumulate_data_gradient(const ModelParams& params, const Dataset& ds, const ClassWeights& c,
                              std::span<const std::size_t> rows, Matrix& acc, std::span<double> scratch);

/// Adds (lambda / K) times the non-bias weights into `grad`.
void add_penalty_gradient(const ModelParams& params, double lambda, Matrix& grad);

/// Linearized lower bound p_nu (1 + log(p_theta / p_nu)) on p_theta. Tight,
/// with matching derivative, at p_theta == p_nu; may be negative.
double bound_prob(double p_theta, double p_nu);

/// (K - 1 - log K) / K + L_log / K, an upper bound on expected_error that is
/// tight when every label probability equals 1/K.
double global_log_bound(const ModelParams& params, const Dataset& ds);

}  // namespace tightbound
