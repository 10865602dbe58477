#include "tightbound/sag.hpp"

#include <algorithm>
#include <cmath>

#include "tightbound/error.hpp"

namespace tightbound {

void TrainConfig::validate() const {
  if (outer_iterations < 1) throw ConfigError("T must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (step_size && !(*step_size > 0.0 && std::isfinite(*step_size))) {
    throw ConfigError("step size must be positive");
  }
}

double SagState::audit_discrepancy() const {
  Matrix total = Matrix::Zero(grad_sum.rows(), grad_sum.cols());
  for (const auto& g : grad_memory) total += g;
  const double scale = std::max(1.0, total.cwiseAbs().maxCoeff());
  return (total - grad_sum).cwiseAbs().maxCoeff() / scale;
}

double auto_step_size(const Dataset& ds, double max_weight, double lambda) {
  double r2 = 0.0;
  for (const auto& row : ds.rows) r2 = std::max(r2, row.squared_norm());
  const double curvature = 0.5 * max_weight * (r2 + 1.0) + lambda / static_cast<double>(ds.n_classes);
  if (!(curvature > 0.0)) throw ConfigError("cannot derive a step size: all weights and lambda are zero");
  return 1.0 / curvature;
}

SagState init_state(ModelParams initial, const Blocks& blocks, const Dataset& ds, const ClassWeights& c,
                    const TrainConfig& config) {
  if (blocks.empty()) throw std::invalid_argument("SAG needs at least one block");
  SagState state;
  state.step_size = config.step_size ? *config.step_size : auto_step_size(ds, c.max_row_sum(), config.lambda);
  if (!(state.step_size > 0.0)) throw std::invalid_argument("step size must be positive");
  const auto rows = initial.weights().rows();
  const auto cols = initial.weights().cols();
  state.params = std::move(initial);
  state.grad_memory.assign(blocks.size(), Matrix::Zero(rows, cols));
  state.grad_sum = Matrix::Zero(rows, cols);
  state.seen.assign(blocks.size(), false);
  return state;
}

namespace {

void apply_update(SagState& state, const Dataset& ds, double lambda, const Matrix& fresh, std::size_t block) {
  Matrix& stored = state.grad_memory[block];
  state.grad_sum += fresh - stored;
  stored = fresh;
  state.seen[block] = true;

  Matrix& w = state.params.mutable_weights();
  const double scale = state.step_size / static_cast<double>(ds.size());
  const Eigen::Index d = w.cols() - 1;
  const double shrink = state.step_size * lambda / static_cast<double>(w.rows());
  // Penalty gradient uses the pre-update weights.
  if (shrink != 0.0) w.leftCols(d) *= (1.0 - shrink);
  w -= scale * state.grad_sum;
  if (!w.allFinite()) {
    throw NumericalError("SAG update produced non-finite parameters (step size " +
                         std::to_string(state.step_size) + " too large?)");
  }
  ++state.updates_done;
}

}  // namespace

void sag_step(SagState& state, const Dataset& ds, const ClassWeights& c, const Blocks& blocks, double lambda,
              std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
  const std::size_t j = pick(rng);
  Matrix fresh = Matrix::Zero(state.grad_sum.rows(), state.grad_sum.cols());
  std::vector<double> scratch(state.params.n_classes());
  accumulate_data_gradient(state.params, ds, c, blocks[j], fresh, scratch);
  apply_update(state, ds, lambda, fresh, j);
}

SagRun sag_minimize(const ModelParams& initial, const Dataset& ds, const ClassWeights& c, double lambda,
                    std::size_t updates, const TrainConfig& config, const Blocks& blocks, std::mt19937_64& rng,
                    std::size_t trace_offset) {
  if (updates == 0) return {initial, {}};
  SagState state = init_state(initial, blocks, ds, c, config);
  SagRun run;
  std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
  Matrix fresh(state.grad_sum.rows(), state.grad_sum.cols());
  std::vector<double> scratch(state.params.n_classes());
  for (std::size_t u = 0; u < updates; ++u) {
    const std::size_t j = pick(rng);
    fresh.setZero();
    accumulate_data_gradient(state.params, ds, c, blocks[j], fresh, scratch);
    apply_update(state, ds, lambda, fresh, j);
    if (config.audit && state.audit_discrepancy() > 1e-9) {
      throw NumericalError("SAG gradient-sum audit failed after update " + std::to_string(state.updates_done));
    }
    if (config.trace && state.updates_done % blocks.size() == 0) {
      run.trace.push_back({trace_offset + state.updates_done, weighted_nll(state.params, ds, c, lambda)});
    }
  }
  run.params = std::move(state.params);
  return run;
}

ModelParams minimize(const ModelParams& initial, const Dataset& ds, const ImportanceWeights& w, double lambda,
                     std::size_t updates, const TrainConfig& config) {
  config.validate();
  const auto blocks = minibatch_partition(ds.size(), std::min(config.batch_size, ds.size()), config.seed);
  std::mt19937_64 rng(config.seed);
  return sag_minimize(initial, ds, ClassWeights::from_importance(w, ds), lambda, updates, config, blocks, rng).params;
}

}  // namespace tightbound
