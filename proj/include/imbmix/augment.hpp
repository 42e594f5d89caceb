#pragma once

// Mixing rules of the unified Mixup training loop.
//
// Every mixer follows the same three steps for a pair (x_i, y_i), (x_j, y_j):
//   input   x~ = lambda_x * x_i + (1 - lambda_x) * x_j
//   weight  lambda_y, chosen per method
//   label   y~ = lambda_y * onehot(y_i) + (1 - lambda_y) * onehot(y_j)
// Methods differ in how j is chosen and how lambda_y follows from lambda_x.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "imbmix/data.hpp"
#include "imbmix/kernels.hpp"
#include "imbmix/matrix.hpp"
#include "imbmix/rng.hpp"

namespace imbmix {

enum class MixMethod {
  mixup,
  remix,
  mamix,
  /// MAMix with Remix's hard-relabel branches checked first. Experimental.
  mamix_remix,
  smote_mix,
  neighbor_mix,
};

std::string_view to_string(MixMethod method) noexcept;
std::optional<MixMethod> parse_mix_method(std::string_view name) noexcept;

/// Whether pairs come from a nearest-neighbor index rather than a batch permutation.
constexpr bool uses_neighbors(MixMethod m) noexcept {
  return m == MixMethod::smote_mix || m == MixMethod::neighbor_mix;
}

struct MixerConfig {
  MixMethod method = MixMethod::mixup;
  double alpha = 1.0;       // Beta(alpha, alpha) for lambda_x
  double omega = 0.25;      // MAMix exponent: eta = n^-omega
  double tau = 0.5;         // Remix threshold
  double p_majority = 3.0;  // Remix P
  int k_neighbors = 5;      // SMOTE-Mix / Neighbor-Mix
  /// Draw lambda_x per pair instead of once per mini-batch.
  bool per_pair_lambda = false;
  /// Pins lambda_x (bypassing the sampler). Ablations and tests only.
  std::optional<double> fixed_lambda;

  void validate() const;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

struct MixedBatch {
  Matrix inputs;       // M x d
  Matrix soft_labels;  // M x K
  std::vector<double> lambda_x;
  std::vector<double> lambda_y;
  std::vector<IndexPair> pairs;
};

/// Exact k-nearest-neighbor lists over a training set, built once.
class NeighborIndex {
 public:
  static NeighborIndex build(const LabeledDataset& data, int k, bool same_class);

  std::span<const std::uint32_t> neighbors(std::size_t row) const noexcept { return lists_[row]; }
  std::size_t size() const noexcept { return lists_.size(); }
  int k() const noexcept { return k_; }
  bool same_class() const noexcept { return same_class_; }

 private:
  NeighborIndex(kernels::NeighborLists lists, int k, bool same_class)
      : lists_(std::move(lists)), k_(k), same_class_(same_class) {}

  kernels::NeighborLists lists_;
  int k_;
  bool same_class_;
};

/// Draws lambda_x ~ Beta(alpha, alpha), mapped into [0, 1).
double sample_lambda_x(double alpha, Rng& rng);

/// Pairs (i, j) of training-set row ids for the rows in `batch`.
/// Permutation methods pair within the batch; neighbor methods draw j uniformly
/// from the index's k neighbors of i and fall back to j = i when i has none.
std::vector<IndexPair> select_pairs(std::span<const std::size_t> batch, MixMethod method,
                                    const NeighborIndex* index, Rng& rng);

inline double lambda_y_mixup(double lambda_x) noexcept { return lambda_x; }

/// Remix: relabel entirely to the minority side of a P-majority pair when
/// lambda_x leaves less than tau of it.
double lambda_y_remix(double lambda_x, std::size_t n_i, std::size_t n_j, double tau, double p_majority) noexcept;

/// eta = n^-omega for both classes of a pair.
std::pair<double, double> mamix_etas(std::size_t n_i, std::size_t n_j, double omega) noexcept;

/// Piecewise-linear map that sends lambda_x = eta_j / (eta_i + eta_j) to 0.5 and
/// keeps the endpoints fixed, so the minority side of the pair keeps more label mass.
double lambda_y_mamix(double lambda_x, double eta_i, double eta_j) noexcept;

/// lambda_y for one pair under `config.method`, given training-set class counts.
double pair_lambda_y(const MixerConfig& config, double lambda_x, const IndexPair& pair, int y_i, int y_j,
                     const ClassHistogram& train_counts);

/// Builds the virtual examples. `lambda_x` holds one value shared by all pairs
/// or one value per pair.
MixedBatch mix_batch(const LabeledDataset& train, std::span<const IndexPair> pairs, std::span<const double> lambda_x,
                     const MixerConfig& config, const ClassHistogram& train_counts);

/// Parents of one SMOTE point: base + u * (neighbor - base).
struct SmoteOrigin {
  std::size_t base;
  std::size_t neighbor;
  double u;
};

/// Classic SMOTE. Every class is topped up to the largest class count; the
/// original rows come first, synthetic rows are appended class by class.
/// A class with a single row is padded with copies of it (with a warning).
LabeledDataset smote_oversample(const LabeledDataset& train, int k, Rng& rng,
                                std::vector<SmoteOrigin>* origins = nullptr);

}  // namespace imbmix
