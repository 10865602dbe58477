#include "tightbound/glm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "tightbound/error.hpp"

namespace tightbound {

namespace {

void check_dims(const ModelParams& params, const Dataset& ds) {
  if (params.n_classes() != ds.n_classes || params.n_features() != ds.n_features) {
    throw std::invalid_argument("model is " + std::to_string(params.n_classes()) + "x" +
                                std::to_string(params.n_features()) + " but dataset is " +
                                std::to_string(ds.n_classes) + "x" + std::to_string(ds.n_features));
  }
}

// Scores -> log-probabilities in place; returns nothing, throws on non-finite.
void log_softmax_inplace(std::span<double> scores) {
  double top = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericalError("non-finite class score");
    top = std::max(top, s);
  }
  double total = 0.0;
  for (double s : scores) total += std::exp(s - top);
  const double log_norm = top + std::log(total);
  for (double& s : scores) s -= log_norm;
}

}  // namespace

ModelParams::ModelParams(std::uint32_t n_classes, std::uint32_t n_features)
    : weights_(Matrix::Zero(n_classes, static_cast<Eigen::Index>(n_features) + 1)) {}

ModelParams::ModelParams(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() < 2 || weights_.cols() < 2) throw std::invalid_argument("model needs K >= 2 and d >= 1");
  if (!weights_.allFinite()) throw NumericalError("non-finite model parameter");
}

void write_params(std::ostream& out, const ModelParams& params) {
  const auto& w = params.weights();
  out << params.n_classes() << ' ' << params.n_features() << '\n';
  std::ostringstream line;
  line.imbue(std::locale::classic());
  line << std::setprecision(17);
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    line.str({});
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (j > 0) line << ' ';
      line << w(k, j);
    }
    out << line.str() << '\n';
  }
}

ModelParams read_params(std::istream& in) {
  in.imbue(std::locale::classic());
  long k = 0, d = 0;
  if (!(in >> k >> d) || k < 2 || d < 1) throw DataError("model file: bad header, expected 'K d'");
  Matrix w(k, d + 1);
  for (long r = 0; r < k; ++r) {
    for (long c = 0; c <= d; ++c) {
      if (!(in >> w(r, c))) {
        throw DataError("model file: expected " + std::to_string(k * (d + 1)) + " values");
      }
    }
  }
  return ModelParams(std::move(w));
}

std::string params_to_string(const ModelParams& params) {
  std::ostringstream out;
  write_params(out, params);
  return out.str();
}

ModelParams params_from_string(const std::string& text) {
  std::istringstream in(text);
  return read_params(in);
}

void ImportanceWeights::validate(std::size_t n) const {
  if (values.size() != n) throw std::invalid_argument("importance weights length mismatch");
  for (double v : values) {
    const bool ok = reward_scaled ? (std::isfinite(v) && v >= 0.0) : (v > 0.0 && v <= 1.0);
    if (!ok) throw std::invalid_argument("importance weight out of range: " + std::to_string(v));
  }
}

ClassWeights::ClassWeights(Matrix values) : values_(std::move(values)) {
  if (!values_.allFinite() || (values_.size() > 0 && values_.minCoeff() < 0.0)) {
    throw std::invalid_argument("class weights must be finite and nonnegative");
  }
  row_sums_ = values_.rowwise().sum();
  max_row_sum_ = row_sums_.size() > 0 ? row_sums_.maxCoeff() : 0.0;
}

ClassWeights ClassWeights::from_importance(const ImportanceWeights& w, const Dataset& ds) {
  w.validate(ds.size());
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(ds.size()), ds.n_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) c(static_cast<Eigen::Index>(i), ds.labels[i]) = w.values[i];
  return ClassWeights(std::move(c));
}

ClassWeights ClassWeights::uniform_labels(const Dataset& ds, double value) {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(ds.size()), ds.n_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) c(static_cast<Eigen::Index>(i), ds.labels[i]) = value;
  return ClassWeights(std::move(c));
}

void class_scores(const ModelParams& params, const FeatureRow& row, std::span<double> out) {
  const auto& w = params.weights();
  const Eigen::Index bias = w.cols() - 1;
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    const double* wk = w.data() + k * w.cols();
    double s = wk[bias];
    for (const auto& e : row.entries()) s += wk[e.index] * e.value;
    out[static_cast<std::size_t>(k)] = s;
  }
}

void softmax_inplace(std::span<double> scores) {
  double top = -std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericalError("non-finite class score");
    top = std::max(top, s);
  }
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (double& s : scores) s /= total;
}

std::vector<double> predict_proba(const ModelParams& params, const FeatureRow& row) {
  if (row.extent() > params.n_features()) throw std::invalid_argument("row index exceeds model dimension");
  std::vector<double> p(params.n_classes());
  class_scores(params, row, p);
  softmax_inplace(p);
  return p;
}

std::uint32_t predict_class(const ModelParams& params, const FeatureRow& row) {
  const auto p = predict_proba(params, row);
  // max_element returns the first maximum, i.e. the smallest index on ties.
  return static_cast<std::uint32_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

Matrix predict_proba_all(const ModelParams& params, const Dataset& ds) {
  check_dims(params, ds);
  Matrix out(static_cast<Eigen::Index>(ds.size()), params.n_classes());
  std::vector<double> p(params.n_classes());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    class_scores(params, ds.rows[i], p);
    softmax_inplace(p);
    for (std::size_t k = 0; k < p.size(); ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = p[k];
  }
  return out;
}

double nll(const ModelParams& params, const Dataset& ds) {
  check_dims(params, ds);
  std::vector<double> s(params.n_classes());
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    class_scores(params, ds.rows[i], s);
    log_softmax_inplace(s);
    total -= s[ds.labels[i]];
  }
  return total / static_cast<double>(ds.size());
}

double expected_error(const ModelParams& params, const Dataset& ds) {
  check_dims(params, ds);
  std::vector<double> p(params.n_classes());
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    class_scores(params, ds.rows[i], p);
    softmax_inplace(p);
    total += p[ds.labels[i]];
  }
  return 1.0 - total / static_cast<double>(ds.size());
}

double l2_penalty(const ModelParams& params) {
  const auto& w = params.weights();
  return 0.5 * w.leftCols(w.cols() - 1).squaredNorm();
}

double weighted_nll(const ModelParams& params, const Dataset& ds, const ImportanceWeights& w, double lambda) {
  return weighted_nll(params, ds, ClassWeights::from_importance(w, ds), lambda);
}

double weighted_nll(const ModelParams& params, const Dataset& ds, const ClassWeights& c, double lambda) {
  check_dims(params, ds);
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (c.size() != ds.size() || c.n_classes() != ds.n_classes) {
    throw std::invalid_argument("class weights shape mismatch");
  }
  const auto& cv = c.values();
  std::vector<double> s(params.n_classes());
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (c.row_sum(i) == 0.0) continue;
    class_scores(params, ds.rows[i], s);
    log_softmax_inplace(s);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double cik = cv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      if (cik != 0.0) total -= cik * s[k];
    }
  }
  const double data = total / static_cast<double>(ds.size());
  return data + lambda / static_cast<double>(params.n_classes()) * l2_penalty(params);
}

void accumulate_data_gradient(const ModelParams& params, const Dataset& ds, const ClassWeights& c,
                              std::span<const std::size_t> rows, Matrix& acc, std::span<double> scratch) {
  const auto& cv = c.values();
  const Eigen::Index n_cols = acc.cols();
  const Eigen::Index bias = n_cols - 1;
  const std::size_t n_classes = params.n_classes();
  for (std::size_t i : rows) {
    const double total = c.row_sum(i);
    if (total == 0.0) continue;
    const auto& row = ds.rows[i];
    class_scores(params, row, scratch);
    softmax_inplace(scratch);
    // d/ds_k [-sum_y c_y log p_y] = p_k sum_y c_y - c_k
    for (std::size_t k = 0; k < n_classes; ++k) {
      const double g = scratch[k] * total - cv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      double* ak = acc.data() + static_cast<Eigen::Index>(k) * n_cols;
      for (const auto& e : row.entries()) ak[e.index] += g * e.value;
      ak[bias] += g;
    }
  }
}

void add_penalty_gradient(const ModelParams& params, double lambda, Matrix& grad) {
  if (lambda == 0.0) return;
  const auto& w = params.weights();
  const double scale = lambda / static_cast<double>(params.n_classes());
  grad.leftCols(w.cols() - 1) += scale * w.leftCols(w.cols() - 1);
}

Matrix grad_weighted_nll(const ModelParams& params, const Dataset& ds, const ImportanceWeights& w, double lambda,
                         std::span<const std::size_t> subset) {
  return grad_weighted_nll(params, ds, ClassWeights::from_importance(w, ds), lambda, subset);
}

Matrix grad_weighted_nll(const ModelParams& params, const Dataset& ds, const ClassWeights& c, double lambda,
                         std::span<const std::size_t> subset) {
  check_dims(params, ds);
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (c.size() != ds.size() || c.n_classes() != ds.n_classes) {
    throw std::invalid_argument("class weights shape mismatch");
  }
  Matrix grad = Matrix::Zero(params.weights().rows(), params.weights().cols());
  std::vector<double> scratch(params.n_classes());
  std::vector<std::size_t> all;
  if (subset.empty()) {
    all.resize(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    subset = all;
  }
  accumulate_data_gradient(params, ds, c, subset, grad, scratch);
  grad /= static_cast<double>(subset.size());
  add_penalty_gradient(params, lambda, grad);
  return grad;
}

double bound_prob(double p_theta, double p_nu) {
  if (!(p_theta > 0.0 && p_theta <= 1.0 && p_nu > 0.0 && p_nu <= 1.0)) {
    throw std::invalid_argument("bound_prob arguments must be in (0, 1]");
  }
  return p_nu * (1.0 + std::log(p_theta / p_nu));
}

double global_log_bound(const ModelParams& params, const Dataset& ds) {
  const double k = static_cast<double>(params.n_classes());
  return (k - 1.0 - std::log(k)) / k + nll(params, ds) / k;
}

}  // namespace tightbound
