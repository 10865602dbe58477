#include "tightbound/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace tightbound {

double classification_error(const ModelParams& params, const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("classification_error on an empty dataset");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (predict_class(params, ds.rows[i]) != ds.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

BinaryRates rates_from_counts(const BinaryCounts& counts) {
  BinaryRates r;
  r.counts = counts;
  const auto pos = counts.tp + counts.fn;
  const auto neg = counts.fp + counts.tn;
  r.tpr = pos ? static_cast<double>(counts.tp) / static_cast<double>(pos) : 0.0;
  r.fpr = neg ? static_cast<double>(counts.fp) / static_cast<double>(neg) : 0.0;
  return r;
}

BinaryRates confusion_from_predictions(std::span<const std::uint32_t> predicted,
                                       std::span<const std::uint32_t> labels, std::uint32_t positive_class) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("prediction/label length mismatch");
  BinaryCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == positive_class;
    const bool guess = predicted[i] == positive_class;
    if (actual && guess) ++c.tp;
    else if (actual) ++c.fn;
    else if (guess) ++c.fp;
    else ++c.tn;
  }
  return rates_from_counts(c);
}

BinaryRates confusion_binary(const ModelParams& params, const Dataset& ds, std::uint32_t positive_class) {
  if (ds.n_classes != 2) throw std::invalid_argument("confusion_binary needs a binary dataset");
  if (positive_class > 1) throw std::invalid_argument("positive class must be 0 or 1");
  std::vector<std::uint32_t> predicted(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) predicted[i] = predict_class(params, ds.rows[i]);
  return confusion_from_predictions(predicted, ds.labels, positive_class);
}

void run_jobs(std::size_t n_jobs, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n_jobs));
  if (workers == 1) {
    for (std::size_t j = 0; j < n_jobs; ++j) fn(j);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t j = next++; j < n_jobs; j = next++) {
        try {
          fn(j);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n_jobs;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t fold_seed(std::uint64_t base, std::size_t fold) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(fold) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t CvPrecursor::models_trained() const {
  std::size_t n = 0;
  for (const auto& row : runs) n += row.size();
  return n;
}

double CvPrecursor::mean_valid_error(std::size_t lambda_index, std::size_t outer_t) const {
  const auto& row = runs.at(lambda_index);
  double total = 0.0;
  for (const auto& r : row) total += r.per_outer_metrics.at(outer_t - 1).valid_error;
  return total / static_cast<double>(row.size());
}

CvSelection CvPrecursor::select() const {
  if (runs.empty() || runs.front().empty()) throw std::logic_error("no cross-validation runs to select from");
  CvSelection best;
  bool have = false;
  for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
    const std::size_t n_outer = runs[l].front().per_outer_metrics.size();
    for (std::size_t t = 1; t <= n_outer; ++t) {
      const double err = mean_valid_error(l, t);
      bool better = !have || err < best.mean_valid_error;
      if (have && err == best.mean_valid_error) {
        const double lam = lambda_grid[l];
        const double best_lam = lambda_grid[best.lambda_index];
        better = lam > best_lam || (lam == best_lam && t < best.outer_t);
      }
      if (better) {
        best = {l, t, err};
        have = true;
      }
    }
  }
  return best;
}

std::vector<OuterMetrics> CvPrecursor::mean_curve(std::size_t lambda_index) const {
  const auto& row = runs.at(lambda_index);
  std::vector<OuterMetrics> curve = row.front().per_outer_metrics;
  for (std::size_t f = 1; f < row.size(); ++f) {
    for (std::size_t t = 0; t < curve.size(); ++t) {
      const auto& m = row[f].per_outer_metrics[t];
      curve[t].train_nll += m.train_nll;
      curve[t].train_error += m.train_error;
      curve[t].valid_nll += m.valid_nll;
      curve[t].valid_error += m.valid_error;
    }
  }
  const double k = static_cast<double>(row.size());
  for (auto& m : curve) {
    m.train_nll /= k;
    m.train_error /= k;
    m.valid_nll /= k;
    m.valid_error /= k;
  }
  return curve;
}

CvPrecursor cross_validate(const Dataset& train_valid, std::span<const double> lambda_grid,
                           const TrainConfig& config_base, std::vector<Fold> folds, std::size_t workers) {
  if (lambda_grid.empty()) throw std::invalid_argument("lambda grid is empty");
  if (folds.size() < 2) throw std::invalid_argument("need at least 2 folds");
  config_base.validate();
  for (const auto& fold : folds) {
    std::vector<bool> in_valid(train_valid.size(), false);
    for (auto i : fold.valid) in_valid.at(i) = true;
    for (auto i : fold.train) {
      if (in_valid.at(i)) throw std::logic_error("fold training rows overlap its validation rows");
    }
  }

  CvPrecursor out;
  out.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  out.config_base = config_base;
  out.runs.assign(lambda_grid.size(), std::vector<TrainResult>(folds.size()));

  std::vector<Dataset> train_sets, valid_sets;
  for (const auto& fold : folds) {
    train_sets.push_back(train_valid.subset(fold.train));
    valid_sets.push_back(train_valid.subset(fold.valid));
  }
  out.folds = std::move(folds);

  const std::size_t n_folds = out.folds.size();
  run_jobs(lambda_grid.size() * n_folds, workers, [&](std::size_t job) {
    const std::size_t l = job / n_folds;
    const std::size_t f = job % n_folds;
    TrainConfig config = config_base;
    config.lambda = lambda_grid[l];
    config.seed = fold_seed(config_base.seed, f);
    TrainOptions options;
    options.keep_snapshots = true;
    out.runs[l][f] = train_iterative(train_sets[f], &valid_sets[f], config, options);
  });
  return out;
}

CvPrecursor cross_validate(const Dataset& train_valid, std::span<const double> lambda_grid,
                           const TrainConfig& config_base, const SplitSpec& spec, std::size_t workers) {
  return cross_validate(train_valid, lambda_grid, config_base, kfold_split(train_valid.size(), spec), workers);
}

void summarize(EvalReport& report) {
  const std::size_t k = report.per_fold.size();
  if (k == 0) throw std::invalid_argument("report has no folds");
  double total = 0.0;
  for (const auto& f : report.per_fold) total += f.test_error;
  report.mean_test_error = total / static_cast<double>(k);
  double ss = 0.0;
  for (const auto& f : report.per_fold) ss += (f.test_error - report.mean_test_error) * (f.test_error - report.mean_test_error);
  report.sigma = k > 1 ? std::sqrt(ss / static_cast<double>(k - 1)) : 0.0;
  report.ci_halfwidth = 3.0 * report.sigma;
}

EvalReport finalize_report(const CvPrecursor& precursor, const Dataset& test) {
  const CvSelection sel = precursor.select();
  EvalReport report;
  report.outer_iterations = precursor.config_base.outer_iterations;
  report.inner_updates = precursor.config_base.inner_updates;
  const auto& row = precursor.runs[sel.lambda_index];
  for (std::size_t f = 0; f < row.size(); ++f) {
    const auto& run = row[f];
    if (run.snapshots.size() < sel.outer_t) throw std::logic_error("cross-validation run lacks snapshots");
    FoldOutcome o;
    o.fold = f;
    o.best_lambda = precursor.lambda_grid[sel.lambda_index];
    o.best_outer_t = sel.outer_t;
    o.valid_error = run.per_outer_metrics[sel.outer_t - 1].valid_error;
    o.test_error = classification_error(run.snapshots[sel.outer_t - 1], test);
    report.per_fold.push_back(o);
  }
  summarize(report);
  return report;
}

}  // namespace tightbound
