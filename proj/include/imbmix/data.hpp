#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "imbmix/matrix.hpp"

namespace imbmix {

/// Per-class sample counts n_j.
struct ClassHistogram {
  std::vector<std::size_t> counts;

  std::size_t num_classes() const noexcept { return counts.size(); }
  std::size_t total() const noexcept;
  std::size_t max() const noexcept;
  std::size_t min() const noexcept;
  /// max(counts) / min(counts); infinite when some class is empty.
  double imbalance_ratio() const noexcept;

  friend bool operator==(const ClassHistogram&, const ClassHistogram&) = default;
};

/// Dense features plus integer labels in [0, K). Immutable once built.
class LabeledDataset {
 public:
  LabeledDataset(Matrix features, std::vector<int> labels, int num_classes);

  const Matrix& features() const noexcept { return features_; }
  std::span<const int> labels() const noexcept { return labels_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return features_.cols(); }

  ClassHistogram class_counts() const;
  /// Row ids of each class in ascending order.
  std::vector<std::vector<std::size_t>> rows_by_class() const;
  LabeledDataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  Matrix features_;
  std::vector<int> labels_;
  int num_classes_;
};

enum class ImbalanceKind { long_tailed, step };

struct ImbalanceSpec {
  ImbalanceKind kind = ImbalanceKind::long_tailed;
  double rho = 1.0;
  double mu = 0.5;  // step only
  std::uint64_t seed = 0;
  /// Head class size. Defaults to the smallest class of the source.
  std::optional<std::size_t> n_max;
  /// When set, the decaying sizes are assigned to classes in a shuffled order
  /// instead of index order.
  std::optional<std::uint64_t> class_permutation_seed;
};

/// counts[k] = round(n_max * rho^(-k/(K-1))), rounded half up and clamped at 1.
ClassHistogram long_tailed_counts(std::size_t n_max, int num_classes, double rho);

/// The last round(mu*K) classes get round(n_max/rho); the others keep n_max.
ClassHistogram step_counts(std::size_t n_max, int num_classes, double rho, double mu);

/// Histogram an ImbalanceSpec asks for, including the optional class permutation.
ClassHistogram target_histogram(const ImbalanceSpec& spec, std::size_t n_max, int num_classes);

struct Subsample {
  LabeledDataset data;
  /// Source row ids kept for each class, ascending.
  std::vector<std::vector<std::size_t>> selected;
};

/// Uniform per-class selection without replacement. Kept rows preserve their
/// source order.
Subsample subsample_imbalanced(const LabeledDataset& source, const ImbalanceSpec& spec);

/// Split manifest: {"num_classes": K, "selected": [[ids of class 0], ...]}.
nlohmann::json manifest_to_json(const std::vector<std::vector<std::size_t>>& selected);
std::vector<std::vector<std::size_t>> manifest_from_json(const nlohmann::json& manifest);

/// K unit-covariance Gaussian clusters whose means are pairwise at least `sep`
/// apart, n_per_class points each.
LabeledDataset synth_gaussian_blobs(int num_classes, std::size_t dim, std::size_t n_per_class, double sep,
                                    std::uint64_t seed);

/// Rows of `dim` floats followed by one integer label, comma separated.
/// The class count is 1 + the largest label unless `num_classes` is given.
LabeledDataset load_csv(const std::filesystem::path& path, bool skip_header = false,
                        std::optional<int> num_classes = std::nullopt);
void write_csv(const LabeledDataset& data, const std::filesystem::path& path);

struct BalancedSplit {
  LabeledDataset train;
  LabeledDataset eval;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> eval_rows;
};

/// Holds out exactly `n_eval_per_class` rows of every class.
BalancedSplit split_balanced_eval(const LabeledDataset& data, std::size_t n_eval_per_class, std::uint64_t seed);

/// Round half up.
inline long long round_half_up(double x) noexcept { return static_cast<long long>(std::floor(x + 0.5)); }

}  // namespace imbmix
