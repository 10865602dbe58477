#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "tightbound/config.hpp"
#include "tightbound/dataset.hpp"
#include "tightbound/glm.hpp"

namespace tightbound {

using Blocks = std::vector<std::vector<std::size_t>>;

struct TracePoint {
  std::size_t updates_done = 0;
  double objective = 0.0;
};

/// Stochastic average gradient over fixed minibatch blocks.
///
/// Memory holds one gradient per block: the unnormalized sum of the data-term
/// gradients of its examples, evaluated at the parameters current when the
/// block was last drawn. The update direction is grad_sum / N plus the exact
/// penalty gradient, where grad_sum totals the stored block gradients.
/// Blocks never drawn contribute zero to grad_sum.
struct SagState {
  ModelParams params;
  std::vector<Matrix> grad_memory;
  Matrix grad_sum;
  std::vector<bool> seen;
  double step_size = 0.0;
  std::size_t updates_done = 0;

  std::size_t n_blocks() const { return grad_memory.size(); }

  /// Max relative discrepancy between grad_sum and a recomputed sum of the
  /// stored block gradients.
  double audit_discrepancy() const;
};

/// 1 / (0.5 * max_weight * (R^2 + 1) + lambda / K) with R^2 the largest
/// squared row norm of the dataset.
double auto_step_size(const Dataset& ds, double max_weight, double lambda);

/// Throws std::invalid_argument on an empty partition or a step size <= 0.
SagState init_state(ModelParams initial, const Blocks& blocks, const Dataset& ds, const ClassWeights& c,
                    const TrainConfig& config);

/// Draws one block uniformly (with replacement), refreshes its stored
/// gradient and moves the parameters. Throws NumericalError if the update is
/// not finite.
void sag_step(SagState& state, const Dataset& ds, const ClassWeights& c, const Blocks& blocks, double lambda,
              std::mt19937_64& rng);

struct SagRun {
  ModelParams params;
  std::vector<TracePoint> trace;  // every n_blocks updates, when tracing
};

/// Exactly `updates` SAG steps from `initial`; deterministic in the seed.
/// `trace_offset` is added to updates_done in the emitted trace rows.
SagRun sag_minimize(const ModelParams& initial, const Dataset& ds, const ClassWeights& c, double lambda,
                    std::size_t updates, const TrainConfig& config, const Blocks& blocks, std::mt19937_64& rng,
                    std::size_t trace_offset = 0);

/// Convenience overload: builds the block partition from config.batch_size
/// and seeds its own generator from config.seed.
ModelParams minimize(const ModelParams& initial, const Dataset& ds, const ImportanceWeights& w, double lambda,
                     std::size_t updates, const TrainConfig& config);

}  // namespace tightbound
