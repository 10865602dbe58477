#include "tightbound/trainer.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "tightbound/error.hpp"
#include "tightbound/eval.hpp"

namespace tightbound {

ImportanceWeights compute_weights(const ModelParams& params, const Dataset& ds) {
  const Matrix p = predict_proba_all(params, ds);
  ImportanceWeights w;
  w.values.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) w.values[i] = p(static_cast<Eigen::Index>(i), ds.labels[i]);
  w.reward_scaled = false;
  return w;
}

TrainResult run_outer_loop(const Dataset& train, const Dataset* valid, const TrainConfig& config,
                           const WeightRule& rule, const TrainOptions& options, const std::string& tag) {
  config.validate();
  train.validate();
  TrainResult result;
  result.params = options.initial ? *options.initial : ModelParams::zeros_like(train);
  result.weights_history_tag = tag;
  const auto blocks = minibatch_partition(train.size(), std::min(config.batch_size, train.size()), config.seed);
  std::mt19937_64 rng(config.seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t t = 0; t < config.outer_iterations; ++t) {
    const ClassWeights c = rule(result.params, train);
    auto run = sag_minimize(result.params, train, c, config.lambda, config.inner_updates, config, blocks, rng,
                            result.total_updates);
    result.params = std::move(run.params);
    result.total_updates += config.inner_updates;
    result.trace.insert(result.trace.end(), run.trace.begin(), run.trace.end());

    OuterMetrics m;
    m.outer_t = t + 1;
    m.train_nll = nll(result.params, train);
    m.train_error = classification_error(result.params, train);
    m.valid_nll = valid ? nll(result.params, *valid) : nan;
    m.valid_error = valid ? classification_error(result.params, *valid) : nan;
    result.per_outer_metrics.push_back(m);
    if (options.keep_snapshots) result.snapshots.push_back(result.params);
  }
  return result;
}

TrainResult train_iterative(const Dataset& train, const Dataset* valid, const TrainConfig& config,
                            const TrainOptions& options) {
  const WeightRule rule = [](const ModelParams& current, const Dataset& ds) {
    return ClassWeights::from_importance(compute_weights(current, ds), ds);
  };
  return run_outer_loop(train, valid, config, rule, options,
                        "label-probability T=" + std::to_string(config.outer_iterations));
}

ModelParams train_online_crystallized(const Dataset& stream, const TrainConfig& config,
                                      std::size_t crystallize_after) {
  config.validate();
  stream.validate();
  if (crystallize_after > stream.size()) throw std::invalid_argument("crystallize_after exceeds stream length");
  ModelParams params = ModelParams::zeros_like(stream);
  ModelParams reference = params;
  const double step = config.step_size ? *config.step_size : auto_step_size(stream, 1.0, config.lambda);
  const double shrink = step * config.lambda / static_cast<double>(stream.n_classes);
  const Eigen::Index d = params.weights().cols() - 1;
  std::vector<double> p(stream.n_classes);
  std::vector<double> p_ref(stream.n_classes);

  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (i == crystallize_after) reference = params;
    const auto& row = stream.rows[i];
    const auto y = stream.labels[i];
    class_scores(reference, row, p_ref);
    softmax_inplace(p_ref);
    const double weight = p_ref[y];

    class_scores(params, row, p);
    softmax_inplace(p);
    Matrix& w = params.mutable_weights();
    if (shrink != 0.0) w.leftCols(d) *= (1.0 - shrink);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = step * weight * (p[k] - (k == y ? 1.0 : 0.0));
      double* wk = w.data() + static_cast<Eigen::Index>(k) * w.cols();
      for (const auto& e : row.entries()) wk[e.index] -= g * e.value;
      wk[d] -= g;
    }
    if (!w.allFinite()) throw NumericalError("online update produced non-finite parameters");
  }
  return params;
}

}  // namespace tightbound
