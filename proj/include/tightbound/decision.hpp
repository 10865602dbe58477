#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tightbound/config.hpp"
#include "tightbound/dataset.hpp"
#include "tightbound/glm.hpp"
#include "tightbound/trainer.hpp"

namespace tightbound {

/// Nonnegative reward R(y, x_i) for taking action y on example i.
class RewardSpec {
 public:
  enum class Mode { classification, cost_asymmetry, undecided, custom };

  /// R = 1 for the true label, 0 elsewhere.
  static RewardSpec classification();
  /// Binary only: R(1 | positives) = c, R(0 | negatives) = 1 - c. c in (0, 1).
  static RewardSpec cost_asymmetry(double c);
  /// The last class is the reject action: R(y_i) = 1, R(reject) = r_h.
  /// r_h in [0, 1).
  static RewardSpec undecided(double r_h);
  /// N x K table of nonnegative rewards.
  static RewardSpec custom(Matrix table);

  Mode mode() const { return mode_; }
  double parameter() const { return parameter_; }

  /// N x K reward table for a dataset; throws std::invalid_argument when the
  /// spec does not fit it.
  Matrix realize(const Dataset& ds) const;

 private:
  Mode mode_ = Mode::classification;
  double parameter_ = 0.0;
  Matrix table_;
};

/// -(1/N) sum_i sum_y R(y, x_i) p(y | x_i). Equals expected_error - 1 in
/// classification mode.
double expected_reward_loss(const ModelParams& params, const Dataset& ds, const RewardSpec& spec);

/// Outer reweighting loop on the expected reward: each inner problem has
/// coefficients R(y, x_i) p(y | x_i, theta_t). Classification mode follows the
/// exact arithmetic path of train_iterative.
TrainResult train_expected_reward(const Dataset& train, const Dataset* valid, const RewardSpec& spec,
                                  const TrainConfig& config, const TrainOptions& options = {});

/// Adds a reject class (index K) without duplicating rows.
std::pair<Dataset, RewardSpec> augment_undecided(const Dataset& ds, double r_h);

/// Mean probability mass on the reject class (the last class).
double mean_undecided_probability(const ModelParams& params, const Dataset& ds);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  std::string operating_tag;
};

enum class RocMethod { log_loss, iterative };

/// For each asymmetry c: train with cost_asymmetry(c) rewards, then take the
/// argmax decision's (fpr, tpr) on the test set. `iterative` runs the outer
/// loop with config.outer_iterations; `log_loss` is the same reward-weighted
/// problem solved once with the whole budget (T = 1, Z = T * Z). Points are
/// sorted by (fpr, tpr) with (0, 0) and (1, 1) added.
std::vector<RocPoint> roc_sweep_asymmetry(const Dataset& train, const Dataset& test, std::span<const double> grid,
                                          const TrainConfig& config, RocMethod method);

/// Averages sweeps point-by-point, matching on operating_tag; result sorted.
std::vector<RocPoint> average_roc(const std::vector<std::vector<RocPoint>>& sweeps);

/// Largest vertical gap between the upper concave hull of the points and the
/// points themselves; 0 for a concave curve.
double upper_hull_deviation(std::span<const RocPoint> points);

struct ConstraintConfig {
  double c_fp = 0.1;       // target false-positive rate, in (0, 1]
  double dual_init = 1.0;  // >= 0
  double dual_step = 0.1;  // > 0
  std::uint32_t positive_class = 1;

  void validate() const;
};

struct ConstrainedStep {
  std::size_t outer_t = 0;
  double dual = 0.0;
  double train_fpr_prob = 0.0;    // mean p(positive | x) over negatives
  double train_fpr_thresh = 0.0;  // argmax decisions
};

struct ConstrainedResult {
  ModelParams params;
  double dual_final = 0.0;
  double achieved_fpr = 0.0;  // probabilistic, on the training set
  std::vector<ConstrainedStep> history;
};

/// Maximizes the mean positive-class probability on positives subject to a
/// probabilistic false-positive rate of at most c_fp, by alternating
/// (1) linearized-bound weights at theta_t, (2) Z SAG updates on the bounded
/// Lagrangian, (3) projected dual ascent on the constraint violation.
ConstrainedResult train_constrained_fpr(const Dataset& train, const ConstraintConfig& cc, const TrainConfig& config);

}  // namespace tightbound
