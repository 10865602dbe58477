#include "tightbound/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

#include "tightbound/error.hpp"

namespace tightbound {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Locale-independent; accepts a leading '+'.
bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_index(std::string_view s, std::uint64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string line_error(const std::string& name, std::size_t line, const std::string& what) {
  return name + ":" + std::to_string(line) + ": " + what;
}

// Maps raw labels onto 0..K-1 (sorted ascending) or onto a provided mapping.
void assign_labels(Dataset& ds, const std::vector<double>& raw, const LoadOptions& options) {
  std::vector<double> values;
  if (options.label_values) {
    values = *options.label_values;
  } else {
    values = raw;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
  }
  ds.labels.reserve(raw.size());
  for (double r : raw) {
    auto it = std::lower_bound(values.begin(), values.end(), r);
    if (it == values.end() || *it != r) {
      throw DataError(ds.name + ": label " + std::to_string(r) + " not in the training label set");
    }
    ds.labels.push_back(static_cast<std::uint32_t>(it - values.begin()));
  }
  std::uint32_t k = static_cast<std::uint32_t>(values.size());
  if (options.n_classes_hint) {
    if (*options.n_classes_hint < k) {
      throw DataError(ds.name + ": " + std::to_string(k) + " distinct labels exceed class hint " +
                      std::to_string(*options.n_classes_hint));
    }
    k = *options.n_classes_hint;
  }
  ds.n_classes = std::max<std::uint32_t>(k, 2);
  ds.raw_labels = std::move(values);
}

void assign_dimension(Dataset& ds, std::uint32_t seen, const LoadOptions& options) {
  if (options.n_features_hint) {
    if (seen > *options.n_features_hint) {
      throw DataError(ds.name + ": feature index " + std::to_string(seen) +
                      " exceeds dimension " + std::to_string(*options.n_features_hint));
    }
    ds.n_features = *options.n_features_hint;
  } else {
    ds.n_features = std::max<std::uint32_t>(seen, 1);
  }
}

}  // namespace

FeatureRow::FeatureRow(std::vector<FeatureEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    if (!std::isfinite(entries_[j].value)) throw DataError("non-finite feature value");
    if (j > 0 && entries_[j].index <= entries_[j - 1].index) {
      throw DataError("feature indices must be strictly increasing");
    }
    squared_norm_ += entries_[j].value * entries_[j].value;
  }
}

FeatureRow FeatureRow::dense(std::span<const double> values) {
  std::vector<FeatureEntry> entries;
  entries.reserve(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    entries.push_back({static_cast<std::uint32_t>(j), values[j]});
  }
  return FeatureRow(std::move(entries));
}

std::uint32_t FeatureRow::extent() const {
  return entries_.empty() ? 0 : entries_.back().index + 1;
}

void Dataset::validate() const {
  if (rows.empty()) throw DataError(name + ": empty dataset");
  if (rows.size() != labels.size()) throw DataError(name + ": rows/labels length mismatch");
  if (n_classes < 2) throw DataError(name + ": need at least 2 classes");
  if (n_features < 1) throw DataError(name + ": need at least 1 feature");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (labels[i] >= n_classes) throw DataError(name + ": label out of range at row " + std::to_string(i));
    if (rows[i].extent() > n_features) {
      throw DataError(name + ": feature index out of range at row " + std::to_string(i));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.n_classes = n_classes;
  out.n_features = n_features;
  out.name = name;
  out.raw_labels = raw_labels;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= rows.size()) throw std::out_of_range("subset index out of range");
    out.rows.push_back(rows[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (auto y : labels) ++counts[y];
  return counts;
}

Dataset parse_libsvm(const std::string& text, const LoadOptions& options, const std::string& name) {
  Dataset ds;
  ds.name = name;
  std::vector<double> raw;
  std::uint32_t extent = 0;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;

    auto next_token = [&view]() {
      const auto start = view.find_first_not_of(" \t");
      if (start == std::string_view::npos) {
        view = {};
        return std::string_view{};
      }
      view.remove_prefix(start);
      const auto stop = view.find_first_of(" \t");
      auto token = view.substr(0, stop);
      view.remove_prefix(stop == std::string_view::npos ? view.size() : stop);
      return token;
    };

    double label = 0.0;
    const auto label_token = next_token();
    if (!parse_double(label_token, label) || !std::isfinite(label)) {
      throw DataError(line_error(name, line_no, "malformed label '" + std::string(label_token) + "'"));
    }
    std::vector<FeatureEntry> entries;
    for (auto token = next_token(); !token.empty(); token = next_token()) {
      const auto colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw DataError(line_error(name, line_no, "expected idx:val, got '" + std::string(token) + "'"));
      }
      std::uint64_t index = 0;
      double value = 0.0;
      if (!parse_index(token.substr(0, colon), index) || index == 0 || index > UINT32_MAX) {
        throw DataError(line_error(name, line_no, "bad feature index in '" + std::string(token) + "'"));
      }
      if (!parse_double(token.substr(colon + 1), value)) {
        throw DataError(line_error(name, line_no, "non-numeric value in '" + std::string(token) + "'"));
      }
      entries.push_back({static_cast<std::uint32_t>(index - 1), value});
    }
    try {
      ds.rows.emplace_back(std::move(entries));
    } catch (const DataError& e) {
      throw DataError(line_error(name, line_no, e.what()));
    }
    extent = std::max(extent, ds.rows.back().extent());
    raw.push_back(label);
  }
  if (ds.rows.empty()) throw DataError(name + ": empty dataset");
  assign_labels(ds, raw, options);
  assign_dimension(ds, extent, options);
  ds.validate();
  return ds;
}

Dataset load_libsvm(const std::filesystem::path& path, const LoadOptions& options) {
  return parse_libsvm(read_file(path), options, path.filename().string());
}

Dataset parse_csv(const std::string& text, std::size_t label_column, const LoadOptions& options,
                  const std::string& name) {
  Dataset ds;
  ds.name = name;
  std::vector<double> raw;
  std::optional<std::size_t> width;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  std::vector<double> cells;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    cells.clear();
    std::size_t start = 0;
    while (true) {
      const auto comma = view.find(',', start);
      const auto cell = view.substr(start, comma == std::string_view::npos ? view.npos : comma - start);
      double value = 0.0;
      if (!parse_double(cell, value)) {
        throw DataError(line_error(name, line_no, "non-numeric cell '" + std::string(trim(cell)) + "'"));
      }
      cells.push_back(value);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!width) {
      width = cells.size();
      if (label_column >= *width) {
        throw DataError(line_error(name, line_no, "label column " + std::to_string(label_column) +
                                                      " out of range for " + std::to_string(*width) +
                                                      " columns"));
      }
      if (*width < 2) throw DataError(line_error(name, line_no, "need a label and at least one feature"));
    } else if (cells.size() != *width) {
      throw DataError(line_error(name, line_no, "ragged row: expected " + std::to_string(*width) +
                                                    " cells, got " + std::to_string(cells.size())));
    }
    raw.push_back(cells[label_column]);
    cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(label_column));
    try {
      ds.rows.push_back(FeatureRow::dense(cells));
    } catch (const DataError& e) {
      throw DataError(line_error(name, line_no, e.what()));
    }
  }
  if (ds.rows.empty()) throw DataError(name + ": empty dataset");
  assign_labels(ds, raw, options);
  assign_dimension(ds, static_cast<std::uint32_t>(*width - 1), options);
  ds.validate();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t label_column, const LoadOptions& options) {
  return parse_csv(read_file(path), label_column, options, path.filename().string());
}

std::string to_libsvm(const Dataset& ds) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double raw = ds.labels[i] < ds.raw_labels.size() ? ds.raw_labels[ds.labels[i]]
                                                          : static_cast<double>(ds.labels[i]);
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, raw);
    out.append(buf, end);
    for (const auto& e : ds.rows[i].entries()) {
      out += ' ';
      out += std::to_string(e.index + 1);
      out += ':';
      auto [vend, vec] = std::to_chars(buf, buf + sizeof buf, e.value);
      out.append(buf, vend);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0)) {
    throw std::invalid_argument("holdout fraction must be in (0, 1)");
  }
  const std::size_t n = ds.size();
  // The train side is floored; 1e-9 absorbs representation error in 1 - f.
  const auto n_train =
      static_cast<std::size_t>(std::floor((1.0 - spec.holdout_fraction) * static_cast<double>(n) + 1e-9));
  const std::size_t n_test = n - std::min(n, n_train);
  if (n_test == 0 || n_train == 0) {
    throw std::invalid_argument("holdout fraction " + std::to_string(spec.holdout_fraction) +
                                " leaves an empty side for N=" + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  if (spec.shuffle) {
    order = seeded_permutation(n, spec.seed);
  } else {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  const std::span<const std::size_t> all(order);
  return {ds.subset(all.first(n_train)), ds.subset(all.subspan(n_train))};
}

std::vector<Fold> kfold_split(std::size_t n, const SplitSpec& spec) {
  const std::size_t k = spec.n_folds;
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  if (n < k) throw std::invalid_argument("n=" + std::to_string(n) + " is smaller than k=" + std::to_string(k));
  std::vector<std::size_t> order(n);
  if (spec.shuffle) {
    order = seeded_permutation(n, spec.seed);
  } else {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::vector<Fold> folds(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j >= start && j < start + len) {
        folds[f].valid.push_back(order[j]);
      } else {
        folds[f].train.push_back(order[j]);
      }
    }
    start += len;
  }
  return folds;
}

std::vector<Fold> random_splits(std::size_t n, std::size_t repeats, double valid_fraction, std::uint64_t seed) {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must be in (0, 1)");
  }
  const auto n_valid = static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(n)));
  if (n_valid == 0 || n_valid == n) throw std::invalid_argument("validation fraction leaves an empty side");
  std::vector<Fold> splits;
  splits.reserve(repeats);
  std::mt19937_64 rng(seed);
  for (std::size_t r = 0; r < repeats; ++r) {
    auto perm = seeded_permutation(n, rng());
    Fold fold;
    fold.valid.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_valid));
    fold.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_valid), perm.end());
    splits.push_back(std::move(fold));
  }
  return splits;
}

std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed) {
  if (batch_size < 1 || batch_size > n) {
    throw std::invalid_argument("batch size must be in [1, n]");
  }
  const auto perm = seeded_permutation(n, seed);
  std::vector<std::vector<std::size_t>> blocks;
  blocks.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    blocks.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                        perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return blocks;
}

StandardScaler StandardScaler::fit(const Dataset& ds) {
  StandardScaler s;
  const std::size_t d = ds.n_features;
  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  for (const auto& row : ds.rows) {
    for (const auto& e : row.entries()) {
      sum[e.index] += e.value;
      sum_sq[e.index] += e.value * e.value;
    }
  }
  const double n = static_cast<double>(ds.size());
  s.mean_.resize(d);
  s.scale_.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    s.mean_[j] = sum[j] / n;
    const double var = std::max(0.0, sum_sq[j] / n - s.mean_[j] * s.mean_[j]);
    s.scale_[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Dataset StandardScaler::transform(const Dataset& ds) const {
  if (ds.n_features != mean_.size()) throw DataError("scaler dimension mismatch");
  Dataset out = ds;
  std::vector<double> dense(mean_.size());
  for (auto& row : out.rows) {
    std::fill(dense.begin(), dense.end(), 0.0);
    for (const auto& e : row.entries()) dense[e.index] = e.value;
    for (std::size_t j = 0; j < dense.size(); ++j) dense[j] = (dense[j] - mean_[j]) / scale_[j];
    row = FeatureRow::dense(dense);
  }
  return out;
}

}  // namespace tightbound
