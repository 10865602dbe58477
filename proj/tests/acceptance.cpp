// Acceptance checks. Prints one PASS/FAIL line per criterion, with the
// measured quantities, and exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "tightbound/cli.hpp"
#include "tightbound/decision.hpp"
#include "tightbound/eval.hpp"
#include "tightbound/report_io.hpp"
#include "tightbound/synthetic.hpp"
#include "tightbound/trainer.hpp"

using namespace tightbound;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(double v) { return format_real(v); }

TrainConfig make_config(std::size_t T, std::size_t Z, double lambda, std::uint64_t seed = 0) {
  TrainConfig c;
  c.outer_iterations = T;
  c.inner_updates = Z;
  c.lambda = lambda;
  c.seed = seed;
  return c;
}

// 1. Linearized bound: below the probability everywhere, tight with matching gradient at the reference.
Verdict lemma_suite() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t violations = 0, inexact = 0;
  for (int i = 0; i < 200000; ++i) {
    const double a = 1.0 - unit(rng), b = 1.0 - unit(rng);
    if (bound_prob(a, b) > a) ++violations;
    if (bound_prob(a, a) != a) ++inexact;
  }
  double worst_gap = 0.0, worst_grad = 0.0;
  std::size_t model_violations = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::uint32_t K = 2 + trial % 4;
    const auto ds = oracle::random_dataset(rng, 10 + trial % 7, 3, K);
    const auto theta = oracle::random_params(rng, K, 3);
    const auto nu = oracle::random_params(rng, K, 3);
    const Matrix p_theta = predict_proba_all(theta, ds);
    const Matrix p_nu = predict_proba_all(nu, ds);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (Eigen::Index k = 0; k < K; ++k)
        if (bound_prob(p_theta(r, k), p_nu(r, k)) > p_theta(r, k)) ++model_violations;
    }
    // at nu = theta
    const auto w = compute_weights(theta, ds);
    double surrogate = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
      surrogate += bound_prob(p_theta(static_cast<Eigen::Index>(i), ds.labels[i]), w.values[i]);
    surrogate /= static_cast<double>(ds.size());
    worst_gap = std::max(worst_gap, std::abs(surrogate - (1.0 - expected_error(theta, ds))));
    const Matrix g = -grad_weighted_nll(theta, ds, w, 0.0);
    const auto fd = oracle::central_difference(
        [&](const oracle::Weights& v) { return 1.0 - expected_error(oracle::to_params(v, K, 3), ds); },
        oracle::from_params(theta));
    worst_grad = std::max(worst_grad, oracle::max_relative_error(oracle::Weights(g.data(), g.data() + g.size()), fd));
  }
  // per-example equality is bitwise; the dataset average differs only by summation order
  const bool pass = violations == 0 && inexact == 0 && model_violations == 0 && worst_gap < 1e-14 && worst_grad < 1e-5;
  return {pass, "pair violations=" + std::to_string(violations) + "/200000, inexact at reference=" +
                    std::to_string(inexact) + ", model violations=" +
                    std::to_string(model_violations) + ", max |surrogate - accuracy| at reference=" + fmt(worst_gap) +
                    ", max gradient rel err=" + fmt(worst_grad)};
}

// 2. expected_error <= global bound, tight at zero parameters.
Verdict bound_chain() {
  std::mt19937_64 rng(2);
  std::size_t violations = 0;
  double worst_zero = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t K = 2 + trial % 9;
    const auto ds = oracle::random_dataset(rng, 5 + trial % 20, 4, K);
    const auto params = oracle::random_params(rng, K, 4, 0.1 + (trial % 10));
    if (expected_error(params, ds) > global_log_bound(params, ds)) ++violations;
    const ModelParams zero(K, 4);
    worst_zero = std::max(worst_zero, std::abs(expected_error(zero, ds) - global_log_bound(zero, ds)));
  }
  return {violations == 0 && worst_zero <= 1e-12,
          "violations=" + std::to_string(violations) + "/1000, max gap at zero=" + fmt(worst_zero)};
}

// 3. One outer iteration from zero is regularized logistic regression.
Verdict single_outer_reduction() {
  double worst_obj = 0.0, worst_err = 0.0;
  for (std::uint64_t instance = 0; instance < 3; ++instance) {
    const auto ds = make_synthetic(SyntheticKind::underfit2d, 1000, 30 + instance);
    const double lambda = 1e-2;
    const auto result = train_iterative(ds, nullptr, make_config(1, 100000, lambda, instance));
    const auto p = oracle::from_dataset(ds);
    const auto coef = oracle::label_coefficients(p, std::vector<double>(ds.size(), 0.5));
    const auto best = oracle::batch_descent(p, coef, lambda, 1e-8);
    worst_obj = std::max(worst_obj, std::abs(oracle::objective(p, oracle::from_params(result.params), coef, lambda) -
                                             oracle::objective(p, best, coef, lambda)));
    worst_err = std::max(worst_err, std::abs(classification_error(result.params, ds) -
                                             classification_error(oracle::to_params(best, 2, 2), ds)));
  }
  return {worst_obj <= 1e-4 && worst_err <= 1e-3,
          "max objective gap=" + fmt(worst_obj) + ", max training error gap=" + fmt(worst_err)};
}

// 4. SAG reaches the batch optimum on tiny convex problems.
Verdict sag_correctness() {
  double worst = 0.0;
  for (std::uint64_t instance = 0; instance < 5; ++instance) {
    std::mt19937_64 rng(200 + instance);
    const auto ds = oracle::random_dataset(rng, 20, 2, 2);
    std::uniform_real_distribution<double> unit(0.2, 1.0);
    ImportanceWeights w{{}, "random", false};
    for (int i = 0; i < 20; ++i) w.values.push_back(unit(rng));
    const auto p = oracle::from_dataset(ds);
    const auto coef = oracle::label_coefficients(p, w.values);
    const double best = oracle::objective(p, oracle::batch_descent(p, coef, 0.1), coef, 0.1);
    auto config = make_config(1, 0, 0.1, instance);
    config.batch_size = 5;
    const auto got = minimize(ModelParams(2, 2), ds, w, 0.1, 20000, config);
    worst = std::max(worst, std::abs(weighted_nll(got, ds, w, 0.1) - best));
  }
  return {worst <= 1e-4, "max objective gap over 5 instances=" + fmt(worst)};
}

struct ProtocolOutcome {
  EvalReport report;
  CvSelection selection;
};

ProtocolOutcome cv_protocol(const Dataset& ds, std::size_t T, std::size_t budget, std::span<const double> grid,
                            std::uint64_t seed) {
  SplitSpec holdout;
  holdout.holdout_fraction = 0.1;
  auto [train_valid, test] = split_holdout(ds, holdout);
  SplitSpec folds{0.1, 5, seed, true};
  auto config = make_config(T, budget / T, 0.0, seed);
  const auto pre = cross_validate(train_valid, grid, config, folds);
  return {finalize_report(pre, test), pre.select()};
}

std::string describe(const ProtocolOutcome& o, std::span<const double> grid) {
  return "T=" + std::to_string(o.report.outer_iterations) + " err=" + fmt(o.report.mean_test_error) +
         " sigma=" + fmt(o.report.sigma) + " (lambda=" + fmt(grid[o.selection.lambda_index]) +
         ", t=" + std::to_string(o.selection.outer_t) + ")";
}

// 5. More outer iterations help on an underfitting problem at equal budget.
Verdict underfitting_benefit() {
  const std::vector<double> grid{1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  const auto ds = make_synthetic(SyntheticKind::underfit2d, 20000, 5);
  const auto one = cv_protocol(ds, 1, 200000, grid, 5);
  const auto ten = cv_protocol(ds, 10, 200000, grid, 5);
  const double combined = std::sqrt(one.report.sigma * one.report.sigma + ten.report.sigma * ten.report.sigma);
  const double gain = one.report.mean_test_error - ten.report.mean_test_error;
  bool pass = gain > 3.0 * combined;
  std::string detail = describe(one, grid) + "; " + describe(ten, grid) + "; gain=" + fmt(gain) +
                       " vs 3*combined sigma=" + fmt(3.0 * combined);

  const char* covtype = std::getenv("TIGHTBOUND_COVTYPE");
  if (covtype != nullptr && fs::exists(covtype)) {
    auto full = load_libsvm(covtype);
    std::vector<std::size_t> head(std::min<std::size_t>(50000, full.size()));
    std::iota(head.begin(), head.end(), 0);
    const auto sub = full.subset(head);
    const std::vector<double> small_grid{1e-6, 1e-4};
    const auto c1 = cv_protocol(sub, 1, 1000000, small_grid, 5);
    const auto c10 = cv_protocol(sub, 10, 1000000, small_grid, 5);
    const bool ordered = c10.report.mean_test_error < c1.report.mean_test_error;
    pass = pass && ordered;
    detail += "; covertype head: " + describe(c1, small_grid) + ", " + describe(c10, small_grid) +
              (ordered ? " (ordering holds)" : " (ordering violated)");
  } else {
    detail += "; covertype ordering sub-check SKIPPED (set TIGHTBOUND_COVTYPE to a libsvm file)";
  }
  return {pass, detail};
}

// 6. On a high-dimensional overfitting problem the outer count does not matter.
Verdict overfitting_null() {
  const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1};
  const auto ds = make_synthetic(SyntheticKind::highdim, 5000, 6);
  const auto one = cv_protocol(ds, 1, 20000, grid, 6);
  const auto ten = cv_protocol(ds, 10, 20000, grid, 6);
  const double combined = std::sqrt(one.report.sigma * one.report.sigma + ten.report.sigma * ten.report.sigma);
  const double diff = std::abs(one.report.mean_test_error - ten.report.mean_test_error);
  return {diff < 3.0 * combined, describe(one, grid) + "; " + describe(ten, grid) + "; |diff|=" + fmt(diff) +
                                     " vs 3*combined sigma=" + fmt(3.0 * combined)};
}

std::vector<std::pair<Dataset, Dataset>> bach_resplits(std::size_t n, std::size_t splits) {
  const auto ds = make_synthetic(SyntheticKind::bach_style, n, 7);
  std::vector<std::pair<Dataset, Dataset>> out;
  for (std::size_t r = 0; r < splits; ++r) out.push_back(split_holdout(ds, SplitSpec{0.5, 5, fold_seed(7, r), true}));
  return out;
}

// 7. Constrained training meets the false-positive target on held-out data.
Verdict constrained_fpr() {
  const auto splits = bach_resplits(10000, 10);
  std::vector<double> achieved;
  std::string detail;
  bool pass = true;
  for (double c : {0.05, 0.1, 0.2}) {
    ConstraintConfig cc;
    cc.c_fp = c;
    cc.dual_step = 1.0;
    double fpr = 0.0, tpr = 0.0;
    for (const auto& [train, test] : splits) {
      const auto result = train_constrained_fpr(train, cc, make_config(30, 1000, 1e-4, 7));
      const auto rates = confusion_binary(result.params, test);
      fpr += rates.fpr;
      tpr += rates.tpr;
    }
    fpr /= static_cast<double>(splits.size());
    tpr /= static_cast<double>(splits.size());
    pass = pass && std::abs(fpr - c) <= 0.02;
    if (!achieved.empty() && fpr < achieved.back()) pass = false;
    achieved.push_back(fpr);
    detail += (detail.empty() ? "" : "; ") + std::string("c_fp=") + fmt(c) + " test fpr=" + fmt(fpr) +
              " tpr=" + fmt(tpr);
  }
  return {pass, detail + " (mean of 10 resplits)"};
}

// 8. The iterative cost-asymmetry sweep is concave.
Verdict roc_concavity() {
  const auto splits = bach_resplits(10000, 10);
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  std::vector<std::vector<RocPoint>> iterative, baseline;
  for (const auto& [train, test] : splits) {
    iterative.push_back(roc_sweep_asymmetry(train, test, grid, make_config(10, 1000, 1e-4, 8), RocMethod::iterative));
    baseline.push_back(roc_sweep_asymmetry(train, test, grid, make_config(10, 1000, 1e-4, 8), RocMethod::log_loss));
  }
  const double dev = upper_hull_deviation(average_roc(iterative));
  const double dev_base = upper_hull_deviation(average_roc(baseline));
  return {dev <= 0.01, "iterative hull deviation=" + fmt(dev) + " (log-loss sweep, reported only: " +
                           fmt(dev_base) + ")"};
}

// 9. A rewarded reject option is still not chosen on separable data.
Verdict undecided_class() {
  const auto ds = make_synthetic(SyntheticKind::separable, 2000, 9);
  const double r_h = 0.8;
  const auto [aug, spec] = augment_undecided(ds, r_h);
  const auto result = train_expected_reward(aug, nullptr, spec, make_config(30, 500, 1e-6, 9));
  const double p_u = mean_undecided_probability(result.params, aug);
  return {p_u < 0.05, "mean p(undecided)=" + fmt(p_u) + "; log-loss target p(label)=1/(1+r_h)=" +
                          fmt(1.0 / (1.0 + r_h))};
}

// 10. CLI reruns are byte-identical.
Verdict determinism() {
  const std::vector<std::vector<std::string>> commands{
      {"train", "--data", "synthetic:underfit2d:2000", "--T", "5", "--Z", "500", "--lambda", "1e-4", "--trace",
       "--holdout", "0.2"},
      {"cv", "--data", "synthetic:underfit2d:1000", "--folds", "3", "--T-grid", "1,5", "--budget", "2000",
       "--lambda-grid", "1e-4,1e-2", "--jobs", "3"},
      {"roc", "--data", "synthetic:bach_style:1000", "--T", "3", "--Z", "300", "--splits", "3", "--jobs", "2"},
      {"constrained", "--data", "synthetic:bach_style:1000", "--T", "5", "--Z", "300", "--cfp", "0.1",
       "--dual-step", "1", "--splits", "2"},
      {"undecided", "--data", "synthetic:separable:500", "--T", "5", "--Z", "300", "--rh", "0.8"},
      {"bench", "--kind", "bach_style", "--n", "1000", "--folds", "3", "--T-grid", "1,4", "--budget", "1200",
       "--lambda-grid", "1e-3"},
  };
  const auto root = fs::temp_directory_path() / "tightbound_acceptance";
  std::size_t files = 0;
  std::string mismatched;
  for (const auto& base : commands) {
    std::string manifest[2];
    for (int rep = 0; rep < 2; ++rep) {
      const auto dir = root / base[0];
      fs::remove_all(dir);
      auto args = base;
      args.insert(args.end(), {"--out", dir.string()});
      std::ostringstream out, err;
      if (cli::run(args, out, err) != cli::kSuccess) return {false, base[0] + " failed: " + err.str()};
      manifest[rep] = read_text_file(dir / "manifest");
      if (rep == 1) {
        const auto parsed = nlohmann::json::parse(manifest[rep]);
        for (const auto& [name, digest] : parsed["files"].items()) {
          ++files;
          if (cli::sha256_hex(read_text_file(dir / name)) != digest) mismatched += " " + base[0] + "/" + name;
        }
      }
    }
    if (manifest[0] != manifest[1]) mismatched += " " + base[0] + "/manifest";
  }
  fs::remove_all(root);
  return {mismatched.empty(), std::to_string(commands.size()) + " commands, " + std::to_string(files) +
                                  " files compared" + (mismatched.empty() ? "" : "; mismatched:" + mismatched)};
}

}  // namespace

// Optional arguments select criteria by number; default runs all of them.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"linearized bound below probability, tight with matching gradient", lemma_suite},
      {"expected error below the global log-loss bound", bound_chain},
      {"single outer iteration equals regularized logistic regression", single_outer_reduction},
      {"SAG reaches the batch optimum", sag_correctness},
      {"underfitting: T=10 beats T=1 at equal budget", underfitting_benefit},
      {"overfitting: T=1 and T=10 indistinguishable", overfitting_null},
      {"constrained false-positive rate", constrained_fpr},
      {"iterative ROC sweep is concave", roc_concavity},
      {"reject option not chosen on separable data", undecided_class},
      {"CLI reruns are byte-identical", determinism},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const auto n = static_cast<std::size_t>(std::atoi(argv[a]));
    if (n >= 1 && n <= criteria.size()) selected[n - 1] = true;
  }
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!selected[c]) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[c].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.pass) ++failures;
    std::printf("%s [%zu] %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", c + 1, criteria[c].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
