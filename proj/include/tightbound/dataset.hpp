#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tightbound {

struct FeatureEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  bool operator==(const FeatureEntry&) const = default;
};

/// Sparse feature vector. Entries are sorted by strictly increasing index;
/// the implicit bias feature is not stored.
class FeatureRow {
 public:
  FeatureRow() = default;
  /// Throws DataError if indices are not strictly increasing or a value is
  /// not finite.
  explicit FeatureRow(std::vector<FeatureEntry> entries);

  static FeatureRow dense(std::span<const double> values);

  const std::vector<FeatureEntry>& entries() const { return entries_; }
  double squared_norm() const { return squared_norm_; }
  std::size_t size() const { return entries_.size(); }
  /// One past the largest stored index, or 0 for an empty row.
  std::uint32_t extent() const;

  bool operator==(const FeatureRow& other) const { return entries_ == other.entries_; }

 private:
  std::vector<FeatureEntry> entries_;
  double squared_norm_ = 0.0;
};

/// Labeled examples with 0-based class indices. Immutable after construction
/// in practice: all library functions take it by const reference.
struct Dataset {
  std::vector<FeatureRow> rows;
  std::vector<std::uint32_t> labels;
  std::uint32_t n_classes = 0;
  std::uint32_t n_features = 0;
  std::string name;
  // raw_labels[k] is the label text that was mapped to class k.
  std::vector<double> raw_labels;

  std::size_t size() const { return rows.size(); }

  /// Checks every structural invariant; throws DataError on violation.
  void validate() const;

  /// Rows selected by index, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Number of examples per class.
  std::vector<std::size_t> class_counts() const;
};

struct SplitSpec {
  double holdout_fraction = 0.1;
  std::uint32_t n_folds = 5;
  std::uint64_t seed = 0;
  bool shuffle = false;
};

struct LoadOptions {
  // Fixes K (labels must then be 0..K-1 after sorting, or fewer distinct).
  std::optional<std::uint32_t> n_classes_hint;
  // Fixes d; indices beyond it are an error.
  std::optional<std::uint32_t> n_features_hint;
  // Reuse the label mapping of a training set (raw label -> class index).
  std::optional<std::vector<double>> label_values;
};

Dataset load_libsvm(const std::filesystem::path& path, const LoadOptions& options = {});
Dataset parse_libsvm(const std::string& text, const LoadOptions& options = {},
                     const std::string& name = "libsvm");

Dataset load_csv(const std::filesystem::path& path, std::size_t label_column,
                 const LoadOptions& options = {});
Dataset parse_csv(const std::string& text, std::size_t label_column,
                  const LoadOptions& options = {}, const std::string& name = "csv");

/// Serializes with 1-based indices and raw labels, 17 significant digits.
std::string to_libsvm(const Dataset& ds);

/// Positional split: first floor((1 - f) N) rows vs the remaining rows, after
/// a seeded permutation when spec.shuffle is set.
std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, const SplitSpec& spec);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};

/// k folds over [0, n). Validation sets are contiguous blocks of a seeded
/// permutation (identity when spec.shuffle is false); sizes differ by at most 1.
std::vector<Fold> kfold_split(std::size_t n, const SplitSpec& spec);

/// Repeated random train/valid splits, for protocols that do not use k-fold.
std::vector<Fold> random_splits(std::size_t n, std::size_t repeats, double valid_fraction,
                                std::uint64_t seed);

/// Seeded permutation of [0, n) cut into ceil(n / batch_size) contiguous
/// blocks; the last block may be short.
std::vector<std::vector<std::size_t>> minibatch_partition(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed);

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// Per-feature affine map x -> (x - mean) / stddev fit on one dataset and
/// applied to others. Zero-variance features are left centered only.
class StandardScaler {
 public:
  static StandardScaler fit(const Dataset& ds);
  Dataset transform(const Dataset& ds) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace tightbound
