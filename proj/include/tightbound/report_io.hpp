#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tightbound/decision.hpp"
#include "tightbound/eval.hpp"
#include "tightbound/sag.hpp"
#include "tightbound/trainer.hpp"

namespace tightbound {

/// Reals are written with 10 significant digits, locale-independent; NaN is
/// written as "nan". Lines end with LF.
std::string format_real(double value);

/// Header `outer_t,train_nll,train_err,valid_nll,valid_err`, one row per
/// outer iteration.
std::string metrics_csv(std::span<const OuterMetrics> metrics);
std::vector<OuterMetrics> parse_metrics_csv(const std::string& text);

std::string trace_csv(std::span<const TracePoint> trace);
std::string roc_csv(std::span<const RocPoint> points);
std::string constrained_csv(std::span<const ConstrainedStep> steps);

/// One row per fold, then a summary row (fold = "summary") holding the mean
/// validation and test errors, sigma and the 3-sigma halfwidth.
std::string eval_report_csv(const EvalReport& report);

/// Plain-text table: columns T, Z, test error +- 3 sigma (percent).
std::string eval_table(std::span<const EvalReport> reports);

struct CurveSeries {
  std::string label;
  std::vector<OuterMetrics> metrics;
};

/// 2 x 2 panel line chart: rows train / valid, columns NLL / error, one
/// polyline per series against the outer iteration index. Self-contained SVG.
std::string render_curves_svg(std::span<const CurveSeries> series);

/// Loads each CSV (label = file stem) and renders them. Throws DataError on
/// malformed input.
std::string render_curves_svg(std::span<const std::filesystem::path> csv_paths);

/// Writes bytes as-is (binary mode, so LF endings survive). Throws DataError on
/// I/O failure.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace tightbound
