#include "tightbound/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "tightbound/dataset.hpp"
#include "tightbound/decision.hpp"
#include "tightbound/error.hpp"
#include "tightbound/eval.hpp"
#include "tightbound/report_io.hpp"
#include "tightbound/synthetic.hpp"
#include "tightbound/trainer.hpp"

namespace tightbound::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

struct Options {
  std::string command;
  std::vector<std::string> argv;

  std::string data;
  std::string format = "libsvm";
  std::size_t label_col = 0;
  bool scale = false;

  std::size_t T = 1;
  std::size_t Z = 1000;
  std::vector<std::size_t> t_grid;
  std::string budget;
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  std::size_t batch = 50;
  std::optional<double> step;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  std::optional<double> holdout;
  bool shuffle_holdout = false;
  double cfp = 0.1;
  double dual_step = 0.1;
  double dual_init = 1.0;
  double rh = 0.5;
  std::vector<double> c_grid;
  std::size_t splits = 1;
  std::size_t jobs = 1;
  std::string out;
  bool trace = false;

  std::string kind = "underfit2d";
  std::size_t n = 20000;
};

// Writes every output file and records its checksum. The manifest itself is
// written before the run (status "running") and rewritten at the end.
class Manifest {
 public:
  Manifest(const Options& opts, fs::path dir) : dir_(std::move(dir)) {
    doc_["command"] = opts.command;
    doc_["argv"] = opts.argv;
    doc_["dataset"] = {{"path", opts.data}, {"format", opts.format}, {"label_col", opts.label_col}};
    doc_["config"] = {{"T", opts.T},       {"Z", opts.Z},         {"lambda", opts.lambda},
                      {"batch", opts.batch}, {"seed", opts.seed}, {"trace", opts.trace},
                      {"step", opts.step ? json(*opts.step) : json("auto")}};
    doc_["output_dir"] = dir_.generic_string();
    doc_["status"] = "running";
    doc_["files"] = json::object();
    fs::create_directories(dir_);
    flush();
  }

  void emit(const std::string& name, const std::string& contents) {
    write_text_file(dir_ / name, contents);
    doc_["files"][name] = sha256_hex(contents);
  }

  void note(const std::string& key, json value) { doc_["notes"][key] = std::move(value); }

  void finalize() {
    doc_["status"] = "complete";
    flush();
  }

 private:
  void flush() { write_text_file(dir_ / "manifest", doc_.dump(2) + "\n"); }

  fs::path dir_;
  json doc_;
};

Dataset load_dataset(const Options& opts) {
  if (opts.data.rfind("synthetic:", 0) == 0) {
    // synthetic:<kind>:<n>
    const auto rest = opts.data.substr(10);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw ConfigError("expected synthetic:<kind>:<n>");
    const auto kind = parse_synthetic_kind(rest.substr(0, colon));
    std::size_t n = 0;
    try {
      n = std::stoul(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad synthetic size in '" + opts.data + "'");
    }
    return make_synthetic(kind, n, opts.seed);
  }
  if (opts.format == "libsvm") return load_libsvm(opts.data);
  if (opts.format == "csv") return load_csv(opts.data, opts.label_col);
  throw ConfigError("unknown format '" + opts.format + "' (expected libsvm or csv)");
}

std::size_t parse_budget(const std::string& text) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("--budget must be a number, got '" + text + "'");
  }
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) throw ConfigError("--budget must be a positive integer");
  return static_cast<std::size_t>(v);
}

TrainConfig make_config(const Options& opts) {
  TrainConfig config;
  config.outer_iterations = opts.T;
  config.inner_updates = opts.Z;
  config.lambda = opts.lambda;
  config.batch_size = opts.batch;
  config.step_size = opts.step;
  config.seed = opts.seed;
  config.trace = opts.trace;
  config.validate();
  return config;
}

std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction, bool shuffle, std::uint64_t seed) {
  SplitSpec spec;
  spec.holdout_fraction = fraction;
  spec.shuffle = shuffle;
  spec.seed = seed;
  return split_holdout(ds, spec);
}

void maybe_scale(const Options& opts, Dataset& train, std::vector<Dataset*> others) {
  if (!opts.scale) return;
  const auto scaler = StandardScaler::fit(train);
  for (auto* d : others) *d = scaler.transform(*d);
  train = scaler.transform(train);
}

int cmd_train(const Options& opts, std::ostream& out) {
  Dataset ds = load_dataset(opts);
  const TrainConfig config = make_config(opts);
  Manifest manifest(opts, opts.out);
  std::optional<Dataset> valid;
  Dataset train = ds;
  if (opts.holdout) {
    auto [tr, va] = holdout_split(ds, *opts.holdout, opts.shuffle_holdout, opts.seed);
    train = std::move(tr);
    valid = std::move(va);
    maybe_scale(opts, train, {&*valid});
  } else {
    maybe_scale(opts, train, {});
  }
  const auto result = train_iterative(train, valid ? &*valid : nullptr, config);
  manifest.emit("metrics.csv", metrics_csv(result.per_outer_metrics));
  manifest.emit("model.txt", params_to_string(result.params));
  const std::vector<CurveSeries> series = {{"T=" + std::to_string(opts.T), result.per_outer_metrics}};
  manifest.emit("curves.svg", render_curves_svg(series));
  if (opts.trace) manifest.emit("trace.csv", trace_csv(result.trace));
  manifest.note("total_updates", result.total_updates);
  manifest.finalize();
  const auto& last = result.per_outer_metrics.back();
  out << "trained T=" << opts.T << " Z=" << opts.Z << " lambda=" << format_real(opts.lambda)
      << ": train_err=" << format_real(last.train_error) << " train_nll=" << format_real(last.train_nll);
  if (valid) out << " valid_err=" << format_real(last.valid_error);
  out << '\n';
  return kSuccess;
}

std::vector<double> default_lambda_grid() { return {1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1}; }

int run_cv_protocol(const Options& opts, const Dataset& ds, std::ostream& out) {
  std::vector<std::size_t> t_grid = opts.t_grid.empty() ? std::vector<std::size_t>{opts.T} : opts.t_grid;
  const std::size_t budget = opts.budget.empty() ? 0 : parse_budget(opts.budget);
  const auto lambda_grid = opts.lambda_grid.empty() ? default_lambda_grid() : opts.lambda_grid;
  const TrainConfig base = make_config(opts);

  Manifest manifest(opts, opts.out);
  auto [train_valid, test] = holdout_split(ds, opts.holdout.value_or(0.1), opts.shuffle_holdout, opts.seed);
  maybe_scale(opts, train_valid, {&test});
  SplitSpec fold_spec;
  fold_spec.n_folds = static_cast<std::uint32_t>(opts.folds);
  fold_spec.shuffle = true;
  fold_spec.seed = opts.seed;

  std::vector<EvalReport> reports;
  std::vector<CurveSeries> curves;
  json per_t = json::array();
  for (std::size_t T : t_grid) {
    TrainConfig config = base;
    config.outer_iterations = T;
    if (budget > 0) {
      if (budget < T) throw ConfigError("--budget is smaller than T=" + std::to_string(T));
      config.inner_updates = budget / T;
    }
    const auto precursor = cross_validate(train_valid, lambda_grid, config, fold_spec, opts.jobs);
    const auto selection = precursor.select();
    EvalReport report = finalize_report(precursor, test);
    const std::string suffix = "_T" + std::to_string(T);
    manifest.emit("report" + suffix + ".csv", eval_report_csv(report));
    const auto curve = precursor.mean_curve(selection.lambda_index);
    manifest.emit("metrics" + suffix + ".csv", metrics_csv(curve));
    curves.push_back({"T=" + std::to_string(T), curve});
    per_t.push_back({{"T", T},
                     {"Z", config.inner_updates},
                     {"selected_lambda", lambda_grid[selection.lambda_index]},
                     {"selected_outer_t", selection.outer_t},
                     {"models_trained", precursor.models_trained()}});
    out << "T=" << T << " Z=" << config.inner_updates << " lambda=" << format_real(lambda_grid[selection.lambda_index])
        << " t=" << selection.outer_t << " test_err=" << format_real(report.mean_test_error) << " +- "
        << format_real(report.ci_halfwidth) << '\n';
    reports.push_back(std::move(report));
  }
  manifest.emit("table.txt", eval_table(reports));
  manifest.emit("curves.svg", render_curves_svg(curves));
  manifest.note("per_T", per_t);
  manifest.finalize();
  return kSuccess;
}

int cmd_cv(const Options& opts, std::ostream& out) { return run_cv_protocol(opts, load_dataset(opts), out); }

int cmd_bench(const Options& opts, std::ostream& out) {
  const auto ds = make_synthetic(parse_synthetic_kind(opts.kind), opts.n, opts.seed);
  return run_cv_protocol(opts, ds, out);
}

std::vector<std::pair<Dataset, Dataset>> resplits(const Options& opts, const Dataset& ds, double default_fraction) {
  std::vector<std::pair<Dataset, Dataset>> out;
  const double fraction = opts.holdout.value_or(default_fraction);
  if (opts.splits <= 1) {
    out.push_back(holdout_split(ds, fraction, opts.shuffle_holdout, opts.seed));
  } else {
    for (std::size_t r = 0; r < opts.splits; ++r) out.push_back(holdout_split(ds, fraction, true, fold_seed(opts.seed, r)));
  }
  for (auto& [train, test] : out) maybe_scale(opts, train, {&test});
  return out;
}

int cmd_roc(const Options& opts, std::ostream& out) {
  const Dataset ds = load_dataset(opts);
  const TrainConfig config = make_config(opts);
  std::vector<double> grid = opts.c_grid;
  if (grid.empty()) {
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  }
  Manifest manifest(opts, opts.out);
  const auto splits = resplits(opts, ds, 0.5);
  std::vector<std::vector<RocPoint>> iterative(splits.size()), baseline(splits.size());
  run_jobs(splits.size(), opts.jobs, [&](std::size_t r) {
    iterative[r] = roc_sweep_asymmetry(splits[r].first, splits[r].second, grid, config, RocMethod::iterative);
    baseline[r] = roc_sweep_asymmetry(splits[r].first, splits[r].second, grid, config, RocMethod::log_loss);
  });
  const auto iter_avg = average_roc(iterative);
  const auto base_avg = average_roc(baseline);
  manifest.emit("roc_iterative.csv", roc_csv(iter_avg));
  manifest.emit("roc_logloss.csv", roc_csv(base_avg));
  const double dev_iter = upper_hull_deviation(iter_avg);
  const double dev_base = upper_hull_deviation(base_avg);
  manifest.note("hull_deviation", {{"iterative", dev_iter}, {"log_loss", dev_base}});
  manifest.finalize();
  out << "ROC over " << splits.size() << " split(s): hull deviation iterative=" << format_real(dev_iter)
      << " log_loss=" << format_real(dev_base) << '\n';
  return kSuccess;
}

int cmd_constrained(const Options& opts, std::ostream& out) {
  const Dataset ds = load_dataset(opts);
  const TrainConfig config = make_config(opts);
  ConstraintConfig cc;
  cc.c_fp = opts.cfp;
  cc.dual_step = opts.dual_step;
  cc.dual_init = opts.dual_init;
  cc.validate();
  Manifest manifest(opts, opts.out);
  const auto splits = resplits(opts, ds, 0.5);
  std::vector<ConstrainedResult> results(splits.size());
  std::vector<BinaryRates> test_rates(splits.size());
  run_jobs(splits.size(), opts.jobs, [&](std::size_t r) {
    results[r] = train_constrained_fpr(splits[r].first, cc, config);
    test_rates[r] = confusion_binary(results[r].params, splits[r].second, cc.positive_class);
  });
  double test_fpr = 0.0, test_tpr = 0.0;
  for (std::size_t r = 0; r < splits.size(); ++r) {
    const std::string name = splits.size() == 1 ? "constrained.csv" : "constrained_" + std::to_string(r) + ".csv";
    manifest.emit(name, constrained_csv(results[r].history));
    test_fpr += test_rates[r].fpr;
    test_tpr += test_rates[r].tpr;
  }
  test_fpr /= static_cast<double>(splits.size());
  test_tpr /= static_cast<double>(splits.size());
  manifest.emit("model.txt", params_to_string(results.front().params));
  std::string summary = "c_fp," + format_real(cc.c_fp) + "\ntest_fpr," + format_real(test_fpr) + "\ntest_tpr," +
                        format_real(test_tpr) + "\ndual_final," + format_real(results.front().dual_final) +
                        "\ntrain_fpr_prob," + format_real(results.front().achieved_fpr) + "\n";
  manifest.emit("summary.csv", summary);
  manifest.finalize();
  out << "c_fp=" << format_real(cc.c_fp) << " test_fpr=" << format_real(test_fpr) << " test_tpr="
      << format_real(test_tpr) << '\n';
  return kSuccess;
}

int cmd_undecided(const Options& opts, std::ostream& out) {
  const Dataset ds = load_dataset(opts);
  const TrainConfig config = make_config(opts);
  Manifest manifest(opts, opts.out);
  Dataset train = ds;
  maybe_scale(opts, train, {});
  auto [augmented, spec] = augment_undecided(train, opts.rh);
  const auto result = train_expected_reward(augmented, nullptr, spec, config);
  const double p_undecided = mean_undecided_probability(result.params, augmented);
  const double contrast = 1.0 / (1.0 + opts.rh);
  manifest.emit("metrics.csv", metrics_csv(result.per_outer_metrics));
  manifest.emit("model.txt", params_to_string(result.params));
  manifest.emit("undecided.csv", "r_h," + format_real(opts.rh) + "\nmean_p_undecided," + format_real(p_undecided) +
                                     "\nlog_loss_target_p_label," + format_real(contrast) + "\n");
  manifest.finalize();
  out << "r_h=" << format_real(opts.rh) << " mean p(undecided)=" << format_real(p_undecided)
      << " (log-loss target p(label)=" << format_real(contrast) << ")\n";
  return kSuccess;
}

void add_data_options(CLI::App* app, Options& o, bool required) {
  auto* data = app->add_option("--data", o.data, "dataset path, or synthetic:<kind>:<n>");
  if (required) data->required();
  app->add_option("--format", o.format, "libsvm | csv")->check(CLI::IsMember({"libsvm", "csv"}));
  app->add_option("--label-col", o.label_col, "label column for csv input");
  app->add_flag("--scale", o.scale, "standardize features (fit on the training side)");
}

void add_train_options(CLI::App* app, Options& o) {
  app->add_option("--T", o.T, "outer iterations")->check(CLI::PositiveNumber);
  app->add_option("--Z", o.Z, "inner updates per outer iteration");
  app->add_option("--lambda", o.lambda, "l2 regularization")->check(CLI::NonNegativeNumber);
  app->add_option("--batch", o.batch, "minibatch size")->check(CLI::PositiveNumber);
  app->add_option("--step", o.step, "SAG step size (default: auto)");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--out", o.out, "output directory")->required();
  app->add_flag("--trace", o.trace, "emit objective traces");
  app->add_option("--holdout", o.holdout, "held-out fraction")->check(CLI::Range(0.0, 1.0));
  app->add_flag("--shuffle-holdout", o.shuffle_holdout, "permute before the holdout split");
}

void add_cv_options(CLI::App* app, Options& o) {
  app->add_option("--T-grid", o.t_grid, "outer iteration counts")->delimiter(',');
  app->add_option("--budget", o.budget, "total updates T*Z held fixed across the T grid");
  app->add_option("--lambda-grid", o.lambda_grid, "regularization grid")->delimiter(',');
  app->add_option("--folds", o.folds, "cross-validation folds")->check(CLI::Range(2, 1000));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  o.argv = args;
  CLI::App app{"Classifier training with iteratively tightened bounds on the classification error",
               "tightbound"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train one model and write metrics, model and curves");
  add_data_options(train, o, true);
  add_train_options(train, o);

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation over lambda for each T at a fixed budget");
  add_data_options(cv, o, true);
  add_train_options(cv, o);
  add_cv_options(cv, o);

  auto* roc = app.add_subcommand("roc", "cost-asymmetry ROC sweeps, iterative and log-loss");
  add_data_options(roc, o, true);
  add_train_options(roc, o);
  roc->add_option("--c-grid", o.c_grid, "cost asymmetries in (0,1)")->delimiter(',');
  roc->add_option("--splits", o.splits, "train/test resplits to average")->check(CLI::PositiveNumber);

  auto* constrained = app.add_subcommand("constrained", "maximize recall subject to a false-positive rate");
  add_data_options(constrained, o, true);
  add_train_options(constrained, o);
  constrained->add_option("--cfp", o.cfp, "target false-positive rate")->check(CLI::Range(0.0, 1.0));
  constrained->add_option("--dual-step", o.dual_step, "dual ascent step");
  constrained->add_option("--dual-init", o.dual_init, "initial dual value");
  constrained->add_option("--splits", o.splits, "train/test resplits to average")->check(CLI::PositiveNumber);

  auto* undecided = app.add_subcommand("undecided", "train with an extra reject action of reward r_h");
  add_data_options(undecided, o, true);
  add_train_options(undecided, o);
  undecided->add_option("--rh", o.rh, "reward of the reject action, in [0,1)");

  auto* bench = app.add_subcommand("bench", "cross-validation protocol on a synthetic dataset");
  bench->add_option("--kind", o.kind, "underfit2d | separable | bach_style | highdim");
  bench->add_option("--n", o.n, "number of examples");
  add_train_options(bench, o);
  add_cv_options(bench, o);

  std::vector<const char*> argv{"tightbound"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  }

  try {
    if (*train) { o.command = "train"; return cmd_train(o, out); }
    if (*cv) { o.command = "cv"; return cmd_cv(o, out); }
    if (*roc) { o.command = "roc"; return cmd_roc(o, out); }
    if (*constrained) { o.command = "constrained"; return cmd_constrained(o, out); }
    if (*undecided) { o.command = "undecided"; return cmd_undecided(o, out); }
    if (*bench) { o.command = "bench"; return cmd_bench(o, out); }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace tightbound::cli
