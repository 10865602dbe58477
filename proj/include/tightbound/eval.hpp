#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tightbound/config.hpp"
#include "tightbound/dataset.hpp"
#include "tightbound/glm.hpp"
#include "tightbound/trainer.hpp"

namespace tightbound {

/// Fraction of rows whose argmax prediction differs from the label.
double classification_error(const ModelParams& params, const Dataset& ds);

struct BinaryCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct BinaryRates {
  double tpr = 0.0;  // 0 when there are no positives
  double fpr = 0.0;  // 0 when there are no negatives
  BinaryCounts counts;
};

BinaryRates rates_from_counts(const BinaryCounts& counts);

/// Thresholded rates of the argmax decision on a binary dataset.
BinaryRates confusion_binary(const ModelParams& params, const Dataset& ds, std::uint32_t positive_class = 1);

/// Rates of an arbitrary decision vector against binary labels.
BinaryRates confusion_from_predictions(std::span<const std::uint32_t> predicted,
                                       std::span<const std::uint32_t> labels, std::uint32_t positive_class = 1);

/// Runs fn(0..n_jobs-1) on up to `workers` threads. Each job must write only
/// to its own output slot; the first exception thrown is rethrown.
void run_jobs(std::size_t n_jobs, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Per-fold seed derived from a base seed; independent of scheduling.
std::uint64_t fold_seed(std::uint64_t base, std::size_t fold);

struct CvSelection {
  std::size_t lambda_index = 0;
  std::size_t outer_t = 1;  // 1-based
  double mean_valid_error = 0.0;
};

/// Every (lambda, fold) training run of a cross-validation sweep, with
/// per-outer-iteration parameter snapshots so the iteration count can be
/// selected after the fact.
struct CvPrecursor {
  std::vector<double> lambda_grid;
  std::vector<Fold> folds;
  TrainConfig config_base;
  std::vector<std::vector<TrainResult>> runs;  // runs[lambda][fold]

  std::size_t models_trained() const;

  /// Mean validation error across folds for (lambda index, outer t).
  double mean_valid_error(std::size_t lambda_index, std::size_t outer_t) const;

  /// Minimizes mean validation error over (lambda, t); ties go to the larger
  /// lambda, then the smaller t.
  CvSelection select() const;

  /// Fold-averaged per-outer metrics for one lambda.
  std::vector<OuterMetrics> mean_curve(std::size_t lambda_index) const;
};

/// Trains one model per (lambda, fold) over explicit folds. Fold models never
/// see their validation rows (checked). `workers` > 1 runs jobs concurrently;
/// the result does not depend on it.
CvPrecursor cross_validate(const Dataset& train_valid, std::span<const double> lambda_grid,
                           const TrainConfig& config_base, std::vector<Fold> folds, std::size_t workers = 1);

/// k-fold variant; folds come from kfold_split(N, spec).
CvPrecursor cross_validate(const Dataset& train_valid, std::span<const double> lambda_grid,
                           const TrainConfig& config_base, const SplitSpec& spec, std::size_t workers = 1);

struct FoldOutcome {
  std::size_t fold = 0;
  double best_lambda = 0.0;
  std::size_t best_outer_t = 1;
  double valid_error = 0.0;
  double test_error = 0.0;
};

struct EvalReport {
  std::size_t outer_iterations = 0;  // T
  std::size_t inner_updates = 0;     // Z
  std::vector<FoldOutcome> per_fold;
  double mean_test_error = 0.0;
  double sigma = 0.0;  // sample standard deviation over folds (k - 1)
  double ci_halfwidth = 0.0;  // 3 sigma
};

/// Fills mean, sigma and the 3-sigma halfwidth from per_fold.
void summarize(EvalReport& report);

/// Evaluates each fold's model at the selected (lambda, t) on the test set.
EvalReport finalize_report(const CvPrecursor& precursor, const Dataset& test);

}  // namespace tightbound
