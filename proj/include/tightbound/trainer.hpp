#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tightbound/config.hpp"
#include "tightbound/dataset.hpp"
#include "tightbound/glm.hpp"
#include "tightbound/sag.hpp"

namespace tightbound {

struct OuterMetrics {
  std::size_t outer_t = 0;  // 1-based: metrics after outer iteration t
  double train_nll = 0.0;
  double train_error = 0.0;
  // NaN when no validation set was supplied.
  double valid_nll = 0.0;
  double valid_error = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<OuterMetrics> per_outer_metrics;
  std::string weights_history_tag;
  // Parameters after each outer iteration (filled when requested).
  std::vector<ModelParams> snapshots;
  // Objective trace across all inner solves (filled when config.trace is set).
  std::vector<TracePoint> trace;
  std::size_t total_updates = 0;
};

/// w_i = p(y_i | x_i, theta_t).
ImportanceWeights compute_weights(const ModelParams& params, const Dataset& ds);

struct TrainOptions {
  std::optional<ModelParams> initial;  // zeros when unset
  bool keep_snapshots = false;
};

/// Builds the inner-problem coefficients from the current parameters.
using WeightRule = std::function<ClassWeights(const ModelParams& current, const Dataset& train)>;

/// Outer reweighting loop shared by every bound-tightening trainer: for each
/// of T outer iterations, derive coefficients from the current parameters,
/// then run Z SAG updates warm-started from them. One block partition and one
/// generator (both from config.seed) serve the whole run.
TrainResult run_outer_loop(const Dataset& train, const Dataset* valid, const TrainConfig& config,
                           const WeightRule& rule, const TrainOptions& options, const std::string& tag);

/// Iteratively reweighted log-loss minimization targeting the expected
/// classification error. T = 1 from zero parameters is ordinary regularized
/// logistic regression (scaled by 1/K).
TrainResult train_iterative(const Dataset& train, const Dataset* valid, const TrainConfig& config,
                            const TrainOptions& options = {});

/// Single-pass online training. The first `crystallize_after` examples use
/// the weights of the initial parameters (zeros: uniform 1/K); the parameters
/// reached at that point are then frozen as the reference for all later
/// weights. One SGD update per example, in stream order.
ModelParams train_online_crystallized(const Dataset& stream, const TrainConfig& config,
                                      std::size_t crystallize_after);

}  // namespace tightbound
