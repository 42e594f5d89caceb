#include "imbmix/augment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <string>

#include "imbmix/error.hpp"

namespace imbmix {

namespace {

constexpr double kLambdaCeiling = 1.0 - 1e-12;

struct MethodName {
  MixMethod method;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {MixMethod::mixup, "mixup"},         {MixMethod::remix, "remix"},
    {MixMethod::mamix, "mamix"},         {MixMethod::mamix_remix, "mamix-remix"},
    {MixMethod::smote_mix, "smote-mix"}, {MixMethod::neighbor_mix, "neighbor-mix"},
};

enum class RemixBranch { to_j, to_i, none };

RemixBranch remix_branch(double lambda_x, std::size_t n_i, std::size_t n_j, double tau, double p_majority) noexcept {
  const double ratio = static_cast<double>(n_i) / static_cast<double>(n_j);
  if (ratio >= p_majority && lambda_x < tau) return RemixBranch::to_j;
  if (ratio <= 1.0 / p_majority && 1.0 - lambda_x < tau) return RemixBranch::to_i;
  return RemixBranch::none;
}

}  // namespace

std::string_view to_string(MixMethod method) noexcept {
  for (const auto& entry : kMethodNames) {
    if (entry.method == method) return entry.name;
  }
  return "unknown";
}

std::optional<MixMethod> parse_mix_method(std::string_view name) noexcept {
  for (const auto& entry : kMethodNames) {
    if (entry.name == name) return entry.method;
  }
  return std::nullopt;
}

void MixerConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::invalid_argument, "mixer: " + what); };
  if (!(alpha > 0.0)) bad("alpha must be > 0");
  if (!(omega > 0.0)) bad("omega must be > 0");
  if (!(tau >= 0.0 && tau <= 1.0)) bad("tau must lie in [0, 1]");
  if (!(p_majority > 1.0)) bad("p_majority must be > 1");
  if (k_neighbors < 1) bad("k_neighbors must be >= 1");
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) bad("fixed_lambda must lie in [0, 1]");
}

NeighborIndex NeighborIndex::build(const LabeledDataset& data, int k, bool same_class) {
  if (k < 1) throw Error(ErrorKind::invalid_argument, "neighbor count must be >= 1");
  const std::span<const int> labels = same_class ? data.labels() : std::span<const int>{};
  return NeighborIndex(kernels::parallel::knn(data.features(), labels, static_cast<std::size_t>(k)), k, same_class);
}

double sample_lambda_x(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::invalid_argument, "invalid-alpha: Beta parameter must be finite and > 0");
  }
  // Beta(a, a) as G1 / (G1 + G2) with G ~ Gamma(a, 1).
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double g1 = gamma(rng);
  const double g2 = gamma(rng);
  const double sum = g1 + g2;
  double lambda = sum > 0.0 ? g1 / sum : (uniform01(rng) < 0.5 ? 0.0 : 1.0);
  if (lambda >= 1.0) lambda = kLambdaCeiling;
  return lambda;
}

std::vector<IndexPair> select_pairs(std::span<const std::size_t> batch, MixMethod method, const NeighborIndex* index,
                                    Rng& rng) {
  std::vector<IndexPair> pairs;
  pairs.reserve(batch.size());
  if (!uses_neighbors(method)) {
    std::vector<std::size_t> partner(batch.begin(), batch.end());
    shuffle(std::span<std::size_t>(partner), rng);
    for (std::size_t m = 0; m < batch.size(); ++m) pairs.emplace_back(batch[m], partner[m]);
    return pairs;
  }

  if (index == nullptr) {
    throw Error(ErrorKind::missing_index, std::string(to_string(method)) + " needs a neighbor index");
  }
  const bool want_same_class = method == MixMethod::smote_mix;
  if (index->same_class() != want_same_class) {
    throw Error(ErrorKind::missing_index, std::string(to_string(method)) + " needs a " +
                                              (want_same_class ? "same-class" : "any-class") + " neighbor index");
  }
  for (std::size_t i : batch) {
    if (i >= index->size()) throw Error(ErrorKind::missing_index, "row " + std::to_string(i) + " is not indexed");
    const auto nbrs = index->neighbors(i);
    // A class singleton has no same-class neighbor: pair it with itself.
    const std::size_t j = nbrs.empty() ? i : nbrs[uniform_index(rng, nbrs.size())];
    pairs.emplace_back(i, j);
  }
  return pairs;
}

double lambda_y_remix(double lambda_x, std::size_t n_i, std::size_t n_j, double tau, double p_majority) noexcept {
  switch (remix_branch(lambda_x, n_i, n_j, tau, p_majority)) {
    case RemixBranch::to_j: return 0.0;
    case RemixBranch::to_i: return 1.0;
    case RemixBranch::none: break;
  }
  return lambda_x;
}

std::pair<double, double> mamix_etas(std::size_t n_i, std::size_t n_j, double omega) noexcept {
  return {std::pow(static_cast<double>(n_i), -omega), std::pow(static_cast<double>(n_j), -omega)};
}

double lambda_y_mamix(double lambda_x, double eta_i, double eta_j) noexcept {
  const double total = eta_i + eta_j;
  const double threshold = eta_j / total;
  double lambda_y;
  if (lambda_x >= threshold) {
    // Same line as 1 - 0.5 (1 - lambda_x) / (eta_i / total), anchored at the
    // threshold so lambda_x == threshold maps to 0.5 without rounding.
    lambda_y = 0.5 + 0.5 * (lambda_x - threshold) / (1.0 - threshold);
  } else {
    lambda_y = 0.5 * lambda_x / threshold;
  }
  return std::clamp(lambda_y, 0.0, 1.0);
}

double pair_lambda_y(const MixerConfig& config, double lambda_x, const IndexPair& pair, int y_i, int y_j,
                     const ClassHistogram& train_counts) {
  const auto count = [&](int y) {
    const auto n = train_counts.counts.at(static_cast<std::size_t>(y));
    if (n == 0) throw Error(ErrorKind::empty_class, "class " + std::to_string(y) + " has no training rows");
    return n;
  };
  switch (config.method) {
    case MixMethod::mixup:
    case MixMethod::neighbor_mix:
      return lambda_y_mixup(lambda_x);
    case MixMethod::smote_mix:
      return 1.0;
    case MixMethod::remix:
      return lambda_y_remix(lambda_x, count(y_i), count(y_j), config.tau, config.p_majority);
    case MixMethod::mamix:
    case MixMethod::mamix_remix: {
      if (pair.first == pair.second) return lambda_x;
      const auto n_i = count(y_i);
      const auto n_j = count(y_j);
      if (config.method == MixMethod::mamix_remix &&
          remix_branch(lambda_x, n_i, n_j, config.tau, config.p_majority) != RemixBranch::none) {
        return lambda_y_remix(lambda_x, n_i, n_j, config.tau, config.p_majority);
      }
      const auto [eta_i, eta_j] = mamix_etas(n_i, n_j, config.omega);
      return lambda_y_mamix(lambda_x, eta_i, eta_j);
    }
  }
  return lambda_x;
}

MixedBatch mix_batch(const LabeledDataset& train, std::span<const IndexPair> pairs, std::span<const double> lambda_x,
                     const MixerConfig& config, const ClassHistogram& train_counts) {
  const std::size_t m = pairs.size();
  if (lambda_x.size() != 1 && lambda_x.size() != m) {
    throw Error(ErrorKind::shape_mismatch, "need one lambda_x or one per pair");
  }
  const std::size_t d = train.dim();
  const auto k = static_cast<std::size_t>(train.num_classes());
  const auto labels = train.labels();

  MixedBatch batch{Matrix(m, d), Matrix(m, k), std::vector<double>(m), std::vector<double>(m),
                   std::vector<IndexPair>(pairs.begin(), pairs.end())};
  for (std::size_t r = 0; r < m; ++r) {
    const auto [i, j] = pairs[r];
    if (i >= train.size() || j >= train.size()) throw Error(ErrorKind::invalid_argument, "pair index out of range");
    const double lx = lambda_x.size() == 1 ? lambda_x[0] : lambda_x[r];
    const int y_i = labels[i];
    const int y_j = labels[j];
    const double ly = pair_lambda_y(config, lx, pairs[r], y_i, y_j, train_counts);

    const auto xi = train.features().row(i);
    const auto xj = train.features().row(j);
    auto out = batch.inputs.row(r);
    for (std::size_t c = 0; c < d; ++c) out[c] = lx * xi[c] + (1.0 - lx) * xj[c];

    auto soft = batch.soft_labels.row(r);
    if (y_i == y_j) {
      soft[static_cast<std::size_t>(y_i)] = 1.0;
    } else {
      soft[static_cast<std::size_t>(y_i)] = ly;
      soft[static_cast<std::size_t>(y_j)] = 1.0 - ly;
    }
    batch.lambda_x[r] = lx;
    batch.lambda_y[r] = ly;
  }
  return batch;
}

LabeledDataset smote_oversample(const LabeledDataset& train, int k, Rng& rng, std::vector<SmoteOrigin>* origins) {
  if (k < 1) throw Error(ErrorKind::invalid_argument, "SMOTE needs k >= 1");
  const ClassHistogram counts = train.class_counts();
  const std::size_t target = counts.max();
  const auto by_class = train.rows_by_class();
  if (origins) origins->clear();

  std::size_t extra = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty()) {
      throw Error(ErrorKind::empty_class, "class " + std::to_string(c) + " has no rows to oversample");
    }
    extra += target - by_class[c].size();
  }
  if (extra == 0) return train;

  const auto index = NeighborIndex::build(train, k, /*same_class=*/true);
  const std::size_t d = train.dim();
  Matrix x(train.size() + extra, d);
  std::vector<int> y(train.size() + extra);
  std::copy(train.features().values().begin(), train.features().values().end(), x.values().begin());
  std::copy(train.labels().begin(), train.labels().end(), y.begin());

  std::size_t r = train.size();
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& rows = by_class[c];
    const std::size_t need = target - rows.size();
    if (need > 0 && rows.size() == 1) {
      std::clog << "warning: class " << c << " has a single example; SMOTE duplicates it " << need << " times\n";
    }
    for (std::size_t t = 0; t < need; ++t, ++r) {
      const std::size_t base = rows[uniform_index(rng, rows.size())];
      const auto nbrs = index.neighbors(base);
      const std::size_t nn = nbrs.empty() ? base : nbrs[uniform_index(rng, nbrs.size())];
      const double u = nbrs.empty() ? 0.0 : uniform01(rng);
      const auto xb = train.features().row(base);
      const auto xn = train.features().row(nn);
      auto out = x.row(r);
      for (std::size_t j = 0; j < d; ++j) out[j] = xb[j] + u * (xn[j] - xb[j]);
      y[r] = static_cast<int>(c);
      if (origins) origins->push_back({base, nn, u});
    }
  }
  return LabeledDataset(std::move(x), std::move(y), train.num_classes());
}

}  // namespace imbmix
