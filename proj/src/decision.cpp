#include "tightbound/decision.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tightbound/error.hpp"
#include "tightbound/eval.hpp"

namespace tightbound {

RewardSpec RewardSpec::classification() { return {}; }

RewardSpec RewardSpec::cost_asymmetry(double c) {
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("cost asymmetry must be in (0, 1)");
  RewardSpec s;
  s.mode_ = Mode::cost_asymmetry;
  s.parameter_ = c;
  return s;
}

RewardSpec RewardSpec::undecided(double r_h) {
  if (!(r_h >= 0.0 && r_h < 1.0)) {
    throw std::invalid_argument("undecided reward must be in [0, 1): an error must not beat abstaining");
  }
  RewardSpec s;
  s.mode_ = Mode::undecided;
  s.parameter_ = r_h;
  return s;
}

RewardSpec RewardSpec::custom(Matrix table) {
  if (!table.allFinite() || (table.size() > 0 && table.minCoeff() < 0.0)) {
    throw std::invalid_argument("rewards must be finite and nonnegative");
  }
  RewardSpec s;
  s.mode_ = Mode::custom;
  s.table_ = std::move(table);
  return s;
}

Matrix RewardSpec::realize(const Dataset& ds) const {
  const auto n = static_cast<Eigen::Index>(ds.size());
  Matrix r = Matrix::Zero(n, ds.n_classes);
  switch (mode_) {
    case Mode::classification:
      for (Eigen::Index i = 0; i < n; ++i) r(i, ds.labels[static_cast<std::size_t>(i)]) = 1.0;
      break;
    case Mode::cost_asymmetry:
      if (ds.n_classes != 2) throw std::invalid_argument("cost asymmetry needs a binary dataset");
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto y = ds.labels[static_cast<std::size_t>(i)];
        r(i, y) = y == 1 ? parameter_ : 1.0 - parameter_;
      }
      break;
    case Mode::undecided:
      if (ds.n_classes < 3) throw std::invalid_argument("undecided rewards need an augmented dataset (K >= 3)");
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto y = ds.labels[static_cast<std::size_t>(i)];
        if (y == ds.n_classes - 1) throw std::invalid_argument("no example may be labeled with the reject class");
        r(i, y) = 1.0;
        r(i, ds.n_classes - 1) = parameter_;
      }
      break;
    case Mode::custom:
      if (table_.rows() != n || table_.cols() != ds.n_classes) {
        throw std::invalid_argument("reward table shape does not match the dataset");
      }
      r = table_;
      break;
  }
  return r;
}

double expected_reward_loss(const ModelParams& params, const Dataset& ds, const RewardSpec& spec) {
  const Matrix r = spec.realize(ds);
  const Matrix p = predict_proba_all(params, ds);
  return -r.cwiseProduct(p).sum() / static_cast<double>(ds.size());
}

TrainResult train_expected_reward(const Dataset& train, const Dataset* valid, const RewardSpec& spec,
                                  const TrainConfig& config, const TrainOptions& options) {
  Matrix rewards = spec.realize(train);
  if (spec.mode() == RewardSpec::Mode::classification) {
    // Identical coefficients to train_iterative: c_iy = p(y_i | x_i) at y_i.
    const WeightRule rule = [](const ModelParams& current, const Dataset& ds) {
      return ClassWeights::from_importance(compute_weights(current, ds), ds);
    };
    return run_outer_loop(train, valid, config, rule, options,
                          "label-probability T=" + std::to_string(config.outer_iterations));
  }
  const WeightRule rule = [rewards = std::move(rewards)](const ModelParams& current, const Dataset& ds) {
    return ClassWeights(rewards.cwiseProduct(predict_proba_all(current, ds)));
  };
  return run_outer_loop(train, valid, config, rule, options,
                        "reward-probability T=" + std::to_string(config.outer_iterations));
}

std::pair<Dataset, RewardSpec> augment_undecided(const Dataset& ds, double r_h) {
  RewardSpec spec = RewardSpec::undecided(r_h);
  Dataset out = ds;
  out.n_classes = ds.n_classes + 1;
  out.name = ds.name + "+undecided";
  return {std::move(out), spec};
}

double mean_undecided_probability(const ModelParams& params, const Dataset& ds) {
  const Matrix p = predict_proba_all(params, ds);
  return p.col(p.cols() - 1).mean();
}

namespace {

std::string tag_for(double c) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(10);
  out << c;
  return out.str();
}

void sort_points(std::vector<RocPoint>& points) {
  std::stable_sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
  });
}

}  // namespace

std::vector<RocPoint> roc_sweep_asymmetry(const Dataset& train, const Dataset& test, std::span<const double> grid,
                                          const TrainConfig& config, RocMethod method) {
  if (train.n_classes != 2 || test.n_classes != 2) throw std::invalid_argument("ROC sweeps need binary data");
  TrainConfig run_config = config;
  if (method == RocMethod::log_loss) {
    run_config.outer_iterations = 1;
    run_config.inner_updates = config.budget();
  }
  std::vector<RocPoint> points;
  for (double c : grid) {
    const auto result = train_expected_reward(train, nullptr, RewardSpec::cost_asymmetry(c), run_config);
    const auto rates = confusion_binary(result.params, test, 1);
    points.push_back({rates.fpr, rates.tpr, tag_for(c)});
  }
  points.push_back({0.0, 0.0, "endpoint"});
  points.push_back({1.0, 1.0, "endpoint"});
  sort_points(points);
  return points;
}

std::vector<RocPoint> average_roc(const std::vector<std::vector<RocPoint>>& sweeps) {
  std::map<std::string, std::pair<RocPoint, std::size_t>> by_tag;
  for (const auto& sweep : sweeps) {
    for (const auto& p : sweep) {
      if (p.operating_tag == "endpoint") continue;
      auto& [acc, count] = by_tag[p.operating_tag];
      acc.fpr += p.fpr;
      acc.tpr += p.tpr;
      acc.operating_tag = p.operating_tag;
      ++count;
    }
  }
  std::vector<RocPoint> out;
  for (auto& [tag, entry] : by_tag) {
    auto [acc, count] = entry;
    acc.fpr /= static_cast<double>(count);
    acc.tpr /= static_cast<double>(count);
    out.push_back(acc);
  }
  out.push_back({0.0, 0.0, "endpoint"});
  out.push_back({1.0, 1.0, "endpoint"});
  sort_points(out);
  return out;
}

double upper_hull_deviation(std::span<const RocPoint> points) {
  if (points.size() < 3) return 0.0;
  std::vector<RocPoint> sorted(points.begin(), points.end());
  sort_points(sorted);
  // Monotone-chain upper hull.
  std::vector<RocPoint> hull;
  for (const auto& p : sorted) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.fpr - a.fpr) * (p.tpr - a.tpr) - (b.tpr - a.tpr) * (p.fpr - a.fpr);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  double worst = 0.0;
  for (const auto& p : sorted) {
    // Hull height at p.fpr: highest hull value among segments covering it.
    double height = -1.0;
    for (std::size_t h = 0; h < hull.size(); ++h) {
      if (hull[h].fpr == p.fpr) height = std::max(height, hull[h].tpr);
      if (h + 1 < hull.size() && hull[h].fpr < p.fpr && p.fpr < hull[h + 1].fpr) {
        const double t = (p.fpr - hull[h].fpr) / (hull[h + 1].fpr - hull[h].fpr);
        height = std::max(height, hull[h].tpr + t * (hull[h + 1].tpr - hull[h].tpr));
      }
    }
    worst = std::max(worst, height - p.tpr);
  }
  return worst;
}

void ConstraintConfig::validate() const {
  if (!(c_fp > 0.0 && c_fp <= 1.0)) throw ConfigError("c_fp must be in (0, 1]");
  if (!(dual_init >= 0.0 && std::isfinite(dual_init))) throw ConfigError("dual_init must be >= 0");
  if (!(dual_step > 0.0 && std::isfinite(dual_step))) throw ConfigError("dual_step must be > 0");
  if (positive_class > 1) throw ConfigError("positive class must be 0 or 1");
}

ConstrainedResult train_constrained_fpr(const Dataset& train, const ConstraintConfig& cc, const TrainConfig& config) {
  cc.validate();
  config.validate();
  train.validate();
  if (train.n_classes != 2) throw std::invalid_argument("constrained training needs a binary dataset");
  const std::uint32_t pos = cc.positive_class;
  const std::uint32_t neg = 1 - pos;
  const auto counts = train.class_counts();
  if (counts[pos] == 0 || counts[neg] == 0) throw DataError("constrained training needs both classes present");
  const double n = static_cast<double>(train.size());
  const double pos_scale = n / static_cast<double>(counts[pos]);
  const double neg_scale = n / static_cast<double>(counts[neg]);

  ConstrainedResult result;
  result.params = ModelParams::zeros_like(train);
  double dual = cc.dual_init;
  const auto blocks = minibatch_partition(train.size(), std::min(config.batch_size, train.size()), config.seed);
  std::mt19937_64 rng(config.seed);
  const auto n_rows = static_cast<Eigen::Index>(train.size());

  for (std::size_t t = 0; t < config.outer_iterations; ++t) {
    // Linearized bounds at theta_t: positives keep p(pos | x) with weight
    // N / N_pos, negatives keep p(neg | x) with weight dual * N / N_neg.
    const Matrix p = predict_proba_all(result.params, train);
    Matrix c = Matrix::Zero(n_rows, 2);
    for (Eigen::Index i = 0; i < n_rows; ++i) {
      if (train.labels[static_cast<std::size_t>(i)] == pos) {
        c(i, pos) = pos_scale * p(i, pos);
      } else {
        c(i, neg) = dual * neg_scale * p(i, neg);
      }
    }
    auto run = sag_minimize(result.params, train, ClassWeights(std::move(c)), config.lambda, config.inner_updates,
                            config, blocks, rng);
    result.params = std::move(run.params);

    const Matrix p_new = predict_proba_all(result.params, train);
    double fpr_prob = 0.0;
    std::size_t false_pos = 0;
    for (Eigen::Index i = 0; i < n_rows; ++i) {
      if (train.labels[static_cast<std::size_t>(i)] != neg) continue;
      fpr_prob += p_new(i, pos);
      // argmax with ties toward class 0
      const std::uint32_t decision = p_new(i, 1) > p_new(i, 0) ? 1u : 0u;
      if (decision == pos) ++false_pos;
    }
    fpr_prob /= static_cast<double>(counts[neg]);
    dual = std::max(0.0, dual + cc.dual_step * (fpr_prob - cc.c_fp));
    if (!std::isfinite(dual)) throw NumericalError("dual multiplier diverged; reduce dual_step");
    result.history.push_back({t + 1, dual, fpr_prob,
                              static_cast<double>(false_pos) / static_cast<double>(counts[neg])});
    result.achieved_fpr = fpr_prob;
  }
  result.dual_final = dual;
  return result;
}

}  // namespace tightbound
