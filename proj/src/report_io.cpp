#include "tightbound/report_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tightbound/error.hpp"

namespace tightbound {

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 48> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 10);
  return std::string(buf.data(), end);
}

namespace {

double parse_real(const std::string& cell, std::size_t line) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError("metrics csv line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
  return v;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Fixed-point coordinate text, independent of locale.
std::string coord(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 2);
  return std::string(buf.data(), end);
}

std::string percent(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), 100.0 * v, std::chars_format::fixed, 2);
  return std::string(buf.data(), end);
}

}  // namespace

std::string metrics_csv(std::span<const OuterMetrics> metrics) {
  std::string out = "outer_t,train_nll,train_err,valid_nll,valid_err\n";
  for (const auto& m : metrics) {
    out += std::to_string(m.outer_t) + ',' + format_real(m.train_nll) + ',' + format_real(m.train_error) + ',' +
           format_real(m.valid_nll) + ',' + format_real(m.valid_error) + '\n';
  }
  return out;
}

std::vector<OuterMetrics> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "outer_t,train_nll,train_err,valid_nll,valid_err") {
    throw DataError("metrics csv: missing or unexpected header");
  }
  std::vector<OuterMetrics> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != 5) throw DataError("metrics csv line " + std::to_string(line_no) + ": expected 5 columns");
    OuterMetrics m;
    const double t = parse_real(cells[0], line_no);
    if (!(t >= 1.0) || t != std::floor(t)) {
      throw DataError("metrics csv line " + std::to_string(line_no) + ": bad outer_t");
    }
    m.outer_t = static_cast<std::size_t>(t);
    m.train_nll = parse_real(cells[1], line_no);
    m.train_error = parse_real(cells[2], line_no);
    m.valid_nll = parse_real(cells[3], line_no);
    m.valid_error = parse_real(cells[4], line_no);
    out.push_back(m);
  }
  return out;
}

std::string trace_csv(std::span<const TracePoint> trace) {
  std::string out = "updates_done,objective\n";
  for (const auto& p : trace) out += std::to_string(p.updates_done) + ',' + format_real(p.objective) + '\n';
  return out;
}

std::string roc_csv(std::span<const RocPoint> points) {
  std::string out = "operating_tag,fpr,tpr\n";
  for (const auto& p : points) out += p.operating_tag + ',' + format_real(p.fpr) + ',' + format_real(p.tpr) + '\n';
  return out;
}

std::string constrained_csv(std::span<const ConstrainedStep> steps) {
  std::string out = "outer_t,dual,train_fpr_prob,train_fpr_thresh\n";
  for (const auto& s : steps) {
    out += std::to_string(s.outer_t) + ',' + format_real(s.dual) + ',' + format_real(s.train_fpr_prob) + ',' +
           format_real(s.train_fpr_thresh) + '\n';
  }
  return out;
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = "fold,best_lambda,best_outer_t,valid_error,test_error,sigma,ci_halfwidth\n";
  double valid_total = 0.0;
  for (const auto& f : report.per_fold) {
    out += std::to_string(f.fold) + ',' + format_real(f.best_lambda) + ',' + std::to_string(f.best_outer_t) + ',' +
           format_real(f.valid_error) + ',' + format_real(f.test_error) + ",,\n";
    valid_total += f.valid_error;
  }
  if (!report.per_fold.empty()) {
    const auto& first = report.per_fold.front();
    out += "summary," + format_real(first.best_lambda) + ',' + std::to_string(first.best_outer_t) + ',' +
           format_real(valid_total / static_cast<double>(report.per_fold.size())) + ',' +
           format_real(report.mean_test_error) + ',' + format_real(report.sigma) + ',' +
           format_real(report.ci_halfwidth) + '\n';
  }
  return out;
}

std::string eval_table(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << "T\tZ\tTest error +- 3 sigma (%)\n";
  for (const auto& r : reports) {
    out << r.outer_iterations << '\t' << r.inner_updates << '\t' << percent(r.mean_test_error) << " +- "
        << percent(r.ci_halfwidth) << '\n';
  }
  out << "sigma: sample standard deviation of the per-fold test errors\n";
  return out.str();
}

std::string render_curves_svg(std::span<const CurveSeries> series) {
  if (series.empty()) throw std::invalid_argument("nothing to plot");
  static constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                         "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  constexpr double kPanelW = 380, kPanelH = 240, kMarginL = 70, kMarginT = 40, kGapX = 90, kGapY = 70;
  const double width = kMarginL + 2 * kPanelW + kGapX + 30;
  const double legend_h = 20.0 * static_cast<double>(series.size()) + 20;
  const double height = kMarginT + 2 * kPanelH + kGapY + 50 + legend_h;

  struct Panel {
    const char* title;
    double OuterMetrics::*field;
  };
  const std::array<Panel, 4> panels = {{{"train negative log-likelihood", &OuterMetrics::train_nll},
                                        {"train classification error", &OuterMetrics::train_error},
                                        {"valid negative log-likelihood", &OuterMetrics::valid_nll},
                                        {"valid classification error", &OuterMetrics::valid_error}}};

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(width) << "\" height=\"" << coord(height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const auto& panel = panels[pi];
    const double x0 = kMarginL + static_cast<double>(pi % 2) * (kPanelW + kGapX);
    const double y0 = kMarginT + static_cast<double>(pi / 2) * (kPanelH + kGapY);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : series) {
      for (const auto& m : s.metrics) {
        const double v = m.*panel.field;
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5 * std::max(1e-6, std::abs(lo) * 0.05);
      hi += 0.5 * std::max(1e-6, std::abs(hi) * 0.05);
    }
    auto sx = [&](double frac) { return x0 + frac * kPanelW; };
    auto sy = [&](double v) { return y0 + kPanelH - (v - lo) / (hi - lo) * kPanelH; };

    svg << "<g>\n";
    svg << "<text x=\"" << coord(x0 + kPanelW / 2) << "\" y=\"" << coord(y0 - 10)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << panel.title << "</text>\n";
    svg << "<rect x=\"" << coord(x0) << "\" y=\"" << coord(y0) << "\" width=\"" << coord(kPanelW) << "\" height=\""
        << coord(kPanelH) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
      const double v = lo + (hi - lo) * tick / 4.0;
      svg << "<line x1=\"" << coord(x0 - 4) << "\" y1=\"" << coord(sy(v)) << "\" x2=\"" << coord(x0) << "\" y2=\""
          << coord(sy(v)) << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << coord(x0 - 6) << "\" y=\"" << coord(sy(v) + 4) << "\" text-anchor=\"end\">"
          << xml_escape(format_real(std::round(v * 1e4) / 1e4)) << "</text>\n";
      const double frac = tick / 4.0;
      svg << "<text x=\"" << coord(sx(frac)) << "\" y=\"" << coord(y0 + kPanelH + 14)
          << "\" text-anchor=\"middle\">" << coord(frac) << "</text>\n";
    }
    svg << "<text x=\"" << coord(x0 + kPanelW / 2) << "\" y=\"" << coord(y0 + kPanelH + 30)
        << "\" text-anchor=\"middle\">fraction of update budget</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto& metrics = series[s].metrics;
      const double n = static_cast<double>(std::max<std::size_t>(1, metrics.size()));
      const char* color = kColors[s % kColors.size()];
      std::ostringstream pts;
      bool any = false;
      for (const auto& m : metrics) {
        const double v = m.*panel.field;
        if (!std::isfinite(v)) continue;
        if (any) pts << ' ';
        pts << coord(sx(static_cast<double>(m.outer_t) / n)) << ',' << coord(sy(v));
        any = true;
      }
      if (!any) continue;
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts.str()
          << "\"/>\n";
      if (metrics.size() <= 40) {
        for (const auto& m : metrics) {
          const double v = m.*panel.field;
          if (!std::isfinite(v)) continue;
          svg << "<circle cx=\"" << coord(sx(static_cast<double>(m.outer_t) / n)) << "\" cy=\"" << coord(sy(v))
              << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
      }
    }
    svg << "</g>\n";
  }

  const double legend_y = kMarginT + 2 * kPanelH + kGapY + 45;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = legend_y + 20.0 * static_cast<double>(s);
    svg << "<line x1=\"" << coord(kMarginL) << "\" y1=\"" << coord(y) << "\" x2=\"" << coord(kMarginL + 30)
        << "\" y2=\"" << coord(y) << "\" stroke=\"" << kColors[s % kColors.size()] << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << coord(kMarginL + 38) << "\" y=\"" << coord(y + 4) << "\">" << xml_escape(series[s].label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_curves_svg(std::span<const std::filesystem::path> csv_paths) {
  if (csv_paths.empty()) throw std::invalid_argument("need at least one metrics csv");
  std::vector<CurveSeries> series;
  for (const auto& path : csv_paths) {
    series.push_back({path.stem().string(), parse_metrics_csv(read_text_file(path))});
  }
  return render_curves_svg(series);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tightbound
