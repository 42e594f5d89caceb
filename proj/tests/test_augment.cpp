#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "imbmix/augment.hpp"
#include "imbmix/error.hpp"
#include "oracles.hpp"

using namespace imbmix;

namespace {

oracle::Mat to_rows(const Matrix& m) {
  oracle::Mat out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

LabeledDataset imbalanced_blobs(std::uint64_t seed) {
  const auto src = synth_gaussian_blobs(4, 3, 60, 3.0, seed);
  return subsample_imbalanced(src, ImbalanceSpec{ImbalanceKind::long_tailed, 10.0, 0.5, seed, {}, {}}).data;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

TEST(LambdaX, UniformForAlphaOne) {
  Rng rng(123);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = sample_lambda_x(1.0, rng);
  EXPECT_LT(oracle::ks_uniform(xs), 0.01);
}

TEST(LambdaX, SymmetricMeanAndRange) {
  for (double alpha : {0.2, 1.0, 4.0}) {
    Rng rng(5);
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
      const double l = sample_lambda_x(alpha, rng);
      ASSERT_GE(l, 0.0);
      ASSERT_LT(l, 1.0);
      sum += l;
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.01) << "alpha=" << alpha;
  }
}

TEST(LambdaX, DeterministicAndRejectsBadAlpha) {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_lambda_x(0.5, a), sample_lambda_x(0.5, b));
  EXPECT_THROW(sample_lambda_x(0.0, a), Error);
  EXPECT_THROW(sample_lambda_x(-1.0, a), Error);
}

TEST(LambdaX, TinyAlphaStaysBelowOne) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(sample_lambda_x(1e-3, rng), 1.0);
}

TEST(LambdaY, MixupIsIdentity) {
  EXPECT_EQ(lambda_y_mixup(0.3), 0.3);
  EXPECT_EQ(lambda_y_mixup(0.0), 0.0);
  EXPECT_EQ(lambda_y_mixup(0.777), 0.777);
}

TEST(LambdaY, RemixBranches) {
  EXPECT_EQ(lambda_y_remix(0.3, 5000, 50, 0.5, 3.0), 0.0);
  EXPECT_EQ(lambda_y_remix(0.8, 50, 5000, 0.5, 3.0), 1.0);
  EXPECT_EQ(lambda_y_remix(0.8, 700, 700, 0.5, 3.0), 0.8);
  // P-majority holds but lambda_x leaves enough of the minority sample.
  EXPECT_EQ(lambda_y_remix(0.7, 5000, 50, 0.5, 3.0), 0.7);
}

TEST(Mamix, Etas) {
  const auto [ei, ej] = mamix_etas(100, 10000, 0.25);
  EXPECT_NEAR(ei, 0.316228, 1e-6);
  EXPECT_NEAR(ej, 0.1, 1e-12);
  const auto [a, b] = mamix_etas(37, 37, 0.7);
  EXPECT_EQ(a, b);
}

TEST(Mamix, WorkedValues) {
  const auto [ei, ej] = mamix_etas(100, 10000, 0.25);
  const double t = ej / (ei + ej);
  EXPECT_NEAR(t, 0.240253073352042, 1e-12);
  // 50-digit evaluation of both branches.
  EXPECT_NEAR(lambda_y_mamix(0.5, ei, ej), 0.670943058495790, 1e-12);
  EXPECT_NEAR(lambda_y_mamix(0.1, ei, ej), 0.208113883008419, 1e-12);
  EXPECT_EQ(lambda_y_mamix(t, ei, ej), 0.5);
}

TEST(Mamix, PropertyContinuousMonotoneEndpointsAndFavoritism) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> n_dist(1, 20000);
  std::uniform_real_distribution<double> w_dist(0.05, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ni = n_dist(rng), nj = n_dist(rng);
    const auto [ei, ej] = mamix_etas(ni, nj, w_dist(rng));
    EXPECT_EQ(lambda_y_mamix(0.0, ei, ej), 0.0);
    EXPECT_EQ(lambda_y_mamix(1.0, ei, ej), 1.0);
    EXPECT_EQ(lambda_y_mamix(ej / (ei + ej), ei, ej), 0.5);
    double prev = 0.0;
    const int grid = 10000;
    const double step_bound = 1.0 / grid / std::min(ei, ej) * (ei + ej);
    for (int g = 0; g <= grid; ++g) {
      const double lx = static_cast<double>(g) / grid;
      const double ly = lambda_y_mamix(lx, ei, ej);
      ASSERT_GE(ly, prev - 1e-15);
      ASSERT_LE(ly - prev, step_bound + 1e-9);  // no jump beyond the steeper slope
      if (ni < nj) ASSERT_GE(ly, lx - 1e-15);
      if (ni > nj) ASSERT_LE(ly, lx + 1e-15);
      prev = ly;
    }
  }
}

TEST(Reduction, EqualCountsGiveMixup) {
  MixerConfig cfg;
  const ClassHistogram counts{{40, 40, 40}};
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double lx = uniform01(rng);
    for (auto m : {MixMethod::mamix, MixMethod::remix, MixMethod::mamix_remix}) {
      cfg.method = m;
      EXPECT_EQ(pair_lambda_y(cfg, lx, {0, 1}, 0, 1, counts), lx);
    }
  }
}

TEST(Mamix, SelfPairDegeneratesToMixup) {
  MixerConfig cfg;
  cfg.method = MixMethod::mamix;
  EXPECT_EQ(pair_lambda_y(cfg, 0.3, {7, 7}, 1, 1, ClassHistogram{{10, 1000}}), 0.3);
}

TEST(MamixRemix, RemixBranchesTakePrecedence) {
  MixerConfig cfg;
  cfg.method = MixMethod::mamix_remix;
  const ClassHistogram counts{{5000, 50}};
  EXPECT_EQ(pair_lambda_y(cfg, 0.3, {0, 1}, 0, 1, counts), 0.0);
  const auto [ei, ej] = mamix_etas(5000, 50, cfg.omega);
  EXPECT_EQ(pair_lambda_y(cfg, 0.7, {0, 1}, 0, 1, counts), lambda_y_mamix(0.7, ei, ej));
}

TEST(NeighborIndexTest, MatchesBruteForceExactly) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = synth_gaussian_blobs(3, 2, 150, 1.0, seed);
    const auto rows = to_rows(data.features());
    const std::vector<int> labels(data.labels().begin(), data.labels().end());
    for (int k : {1, 5, 9}) {
      const auto any = NeighborIndex::build(data, k, false);
      const auto same = NeighborIndex::build(data, k, true);
      const auto ref_any = oracle::brute_knn(rows, nullptr, static_cast<std::size_t>(k));
      const auto ref_same = oracle::brute_knn(rows, &labels, static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < data.size(); ++i) {
        ASSERT_EQ(std::vector<std::uint32_t>(any.neighbors(i).begin(), any.neighbors(i).end()), ref_any[i]);
        ASSERT_EQ(std::vector<std::uint32_t>(same.neighbors(i).begin(), same.neighbors(i).end()), ref_same[i]);
        for (auto j : any.neighbors(i)) ASSERT_NE(j, i);
      }
    }
  }
}

TEST(SelectPairs, MixupIsAPermutationOfTheBatch) {
  Rng rng(3);
  const std::vector<std::size_t> batch{4, 9, 2, 17, 5, 11};
  const auto pairs = select_pairs(batch, MixMethod::mixup, nullptr, rng);
  ASSERT_EQ(pairs.size(), batch.size());
  std::vector<std::size_t> firsts, seconds;
  for (auto [i, j] : pairs) {
    firsts.push_back(i);
    seconds.push_back(j);
  }
  EXPECT_EQ(firsts, batch);
  std::sort(seconds.begin(), seconds.end());
  auto sorted = batch;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(seconds, sorted);
}

TEST(SelectPairs, SmoteMixPairsShareTheClass) {
  const auto data = imbalanced_blobs(5);
  const auto index = NeighborIndex::build(data, 5, true);
  Rng rng(8);
  const auto rows = iota_rows(data.size());
  for (auto [i, j] : select_pairs(rows, MixMethod::smote_mix, &index, rng)) {
    EXPECT_EQ(data.labels()[i], data.labels()[j]);
    const auto nbrs = index.neighbors(i);
    EXPECT_NE(std::find(nbrs.begin(), nbrs.end(), j), nbrs.end());
  }
}

TEST(SelectPairs, NeighborMixOnSeparatedBlobsIsMostlySameClass) {
  const auto data = synth_gaussian_blobs(2, 2, 200, 8.0, 4);
  const auto index = NeighborIndex::build(data, 5, false);
  // Brute-force check of the same statistic on the raw neighbor lists.
  const auto ref = oracle::brute_knn(to_rows(data.features()), nullptr, 5);
  Rng rng(2);
  const auto rows = iota_rows(data.size());
  int same = 0;
  const auto pairs = select_pairs(rows, MixMethod::neighbor_mix, &index, rng);
  for (auto [i, j] : pairs) {
    same += data.labels()[i] == data.labels()[j];
    EXPECT_NE(std::find(ref[i].begin(), ref[i].end(), j), ref[i].end());
  }
  EXPECT_GE(same, static_cast<int>(0.95 * static_cast<double>(pairs.size())));
}

TEST(SelectPairs, Errors) {
  const auto data = imbalanced_blobs(5);
  Rng rng(1);
  const std::vector<std::size_t> batch{0, 1};
  try {
    select_pairs(batch, MixMethod::smote_mix, nullptr, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_index);
  }
  const auto any = NeighborIndex::build(data, 3, false);
  EXPECT_THROW(select_pairs(batch, MixMethod::smote_mix, &any, rng), Error);
}

TEST(SelectPairs, SingletonClassFallsBackToSelfPair) {
  Matrix x(4, 2, std::vector<double>{0, 0, 1, 0, 0, 1, 5, 5});
  const LabeledDataset data(std::move(x), {0, 0, 0, 1}, 2);
  const auto index = NeighborIndex::build(data, 2, true);
  Rng rng(1);
  const std::vector<std::size_t> batch{3};
  const auto pairs = select_pairs(batch, MixMethod::smote_mix, &index, rng);
  EXPECT_EQ(pairs.front(), (IndexPair{3, 3}));
}

TEST(MixBatch, LambdaOneReproducesFirstSample) {
  const auto data = imbalanced_blobs(2);
  MixerConfig cfg;
  const std::vector<IndexPair> pairs{{0, 5}, {3, 1}, {7, 7}};
  const std::vector<double> one{1.0};
  const auto batch = mix_batch(data, pairs, one, cfg, data.class_counts());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto src = data.features().row(pairs[r].first);
    EXPECT_TRUE(std::equal(src.begin(), src.end(), batch.inputs.row(r).begin()));
    for (int c = 0; c < data.num_classes(); ++c) {
      EXPECT_EQ(batch.soft_labels(r, static_cast<std::size_t>(c)), c == data.labels()[pairs[r].first] ? 1.0 : 0.0);
    }
  }
}

TEST(MixBatch, SmoteMixLabelsAreOneHot) {
  const auto data = imbalanced_blobs(3);
  const auto index = NeighborIndex::build(data, 5, true);
  MixerConfig cfg;
  cfg.method = MixMethod::smote_mix;
  Rng rng(6);
  const auto rows = iota_rows(data.size());
  const auto pairs = select_pairs(rows, cfg.method, &index, rng);
  const std::vector<double> lx{0.37};
  const auto batch = mix_batch(data, pairs, lx, cfg, data.class_counts());
  for (std::size_t r = 0; r < batch.soft_labels.rows(); ++r) {
    const auto row = batch.soft_labels.row(r);
    EXPECT_EQ(std::count(row.begin(), row.end(), 1.0), 1);
    EXPECT_EQ(std::count(row.begin(), row.end(), 0.0), static_cast<long>(row.size()) - 1);
    EXPECT_EQ(row[static_cast<std::size_t>(data.labels()[pairs[r].first])], 1.0);
  }
}

TEST(MixBatch, MamixRecomputesLambdaYPerPair) {
  const auto data = imbalanced_blobs(4);
  const auto counts = data.class_counts();
  MixerConfig cfg;
  cfg.method = MixMethod::mamix;
  Rng rng(10);
  const auto rows = iota_rows(data.size());
  const auto pairs = select_pairs(rows, cfg.method, nullptr, rng);
  const std::vector<double> lx{0.42};
  const auto batch = mix_batch(data, pairs, lx, cfg, counts);
  int differing = 0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const int yi = data.labels()[pairs[r].first];
    const int yj = data.labels()[pairs[r].second];
    // Independent evaluation of the piecewise rule.
    const double ei = std::pow(static_cast<double>(counts.counts[yi]), -0.25);
    const double ej = std::pow(static_cast<double>(counts.counts[yj]), -0.25);
    const double t = ej / (ei + ej);
    double expected = 0.42 >= t ? 1 - 0.58 * 0.5 / (ei / (ei + ej)) : 0.5 * 0.42 / t;
    if (pairs[r].first == pairs[r].second) expected = 0.42;
    EXPECT_NEAR(batch.lambda_y[r], expected, 1e-14);
    if (yi != yj) {
      ++differing;
      EXPECT_NEAR(batch.soft_labels(r, static_cast<std::size_t>(yi)), expected, 1e-14);
      EXPECT_NEAR(batch.soft_labels(r, static_cast<std::size_t>(yj)), 1 - expected, 1e-14);
    }
    for (std::size_t c = 0; c < data.dim(); ++c) {
      EXPECT_NEAR(batch.inputs(r, c),
                  0.42 * data.features()(pairs[r].first, c) + 0.58 * data.features()(pairs[r].second, c), 1e-14);
    }
  }
  EXPECT_GT(differing, 0);
}

TEST(MixBatch, PropertySoftLabelRowsSumToOne) {
  const auto data = imbalanced_blobs(6);
  const auto counts = data.class_counts();
  const auto same = NeighborIndex::build(data, 5, true);
  const auto any = NeighborIndex::build(data, 5, false);
  Rng rng(12);
  const auto rows = iota_rows(data.size());
  for (auto m : {MixMethod::mixup, MixMethod::remix, MixMethod::mamix, MixMethod::mamix_remix, MixMethod::smote_mix,
                 MixMethod::neighbor_mix}) {
    MixerConfig cfg;
    cfg.method = m;
    for (int trial = 0; trial < 20; ++trial) {
      const NeighborIndex* idx = m == MixMethod::smote_mix ? &same : (m == MixMethod::neighbor_mix ? &any : nullptr);
      const auto pairs = select_pairs(rows, m, idx, rng);
      std::vector<double> lx(pairs.size());
      for (auto& v : lx) v = sample_lambda_x(0.5, rng);
      const auto batch = mix_batch(data, pairs, lx, cfg, counts);
      for (std::size_t r = 0; r < batch.soft_labels.rows(); ++r) {
        const auto row = batch.soft_labels.row(r);
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
        EXPECT_LE(std::count_if(row.begin(), row.end(), [](double v) { return v != 0.0; }), 2);
      }
    }
  }
}

TEST(Smote, BalancedInputUnchanged) {
  const auto data = synth_gaussian_blobs(3, 2, 20, 2.0, 1);
  Rng rng(1);
  EXPECT_EQ(smote_oversample(data, 5, rng), data);
}

TEST(Smote, TopsUpEveryClassOnSegments) {
  const auto src = synth_gaussian_blobs(2, 3, 1000, 2.0, 2);
  const auto data = subsample_imbalanced(src, ImbalanceSpec{ImbalanceKind::step, 10.0, 0.5, 1, {}, {}}).data;
  ASSERT_EQ(data.class_counts().counts, (std::vector<std::size_t>{1000, 100}));
  Rng rng(3);
  std::vector<SmoteOrigin> origins;
  const auto out = smote_oversample(data, 5, rng, &origins);
  EXPECT_EQ(out.class_counts().counts, (std::vector<std::size_t>{1000, 1000}));
  ASSERT_EQ(origins.size(), 900u);
  const std::vector<int> labels(data.labels().begin(), data.labels().end());
  const auto same = oracle::brute_knn(to_rows(data.features()), &labels, 5);
  for (std::size_t s = 0; s < origins.size(); ++s) {
    const auto& o = origins[s];
    EXPECT_EQ(data.labels()[o.base], 1);
    EXPECT_NE(std::find(same[o.base].begin(), same[o.base].end(), o.neighbor), same[o.base].end());
    // distance from the synthetic point to the segment [base, neighbor]
    const auto p = out.features().row(data.size() + s);
    const auto a = data.features().row(o.base);
    const auto b = data.features().row(o.neighbor);
    double ab2 = 0, ap_ab = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      ab2 += (b[c] - a[c]) * (b[c] - a[c]);
      ap_ab += (p[c] - a[c]) * (b[c] - a[c]);
    }
    const double t = std::clamp(ap_ab / ab2, 0.0, 1.0);
    double d2 = 0;
    for (std::size_t c = 0; c < 3; ++c) d2 += std::pow(p[c] - (a[c] + t * (b[c] - a[c])), 2);
    EXPECT_LT(std::sqrt(d2), 1e-9);
  }
}

TEST(Smote, SingletonClassIsDuplicated) {
  Matrix x(4, 2, std::vector<double>{0, 0, 1, 0, 0, 1, 5, 5});
  const LabeledDataset data(std::move(x), {0, 0, 0, 1}, 2);
  Rng rng(1);
  const auto out = smote_oversample(data, 3, rng);
  EXPECT_EQ(out.class_counts().counts, (std::vector<std::size_t>{3, 3}));
  for (std::size_t r = 4; r < out.size(); ++r) {
    EXPECT_EQ(out.features()(r, 0), 5.0);
    EXPECT_EQ(out.features()(r, 1), 5.0);
  }
}

TEST(MixerConfigTest, Validation) {
  MixerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.p_majority = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = MixerConfig{};
  cfg.k_neighbors = 0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_EQ(parse_mix_method("neighbor-mix"), MixMethod::neighbor_mix);
  EXPECT_FALSE(parse_mix_method("cutmix"));
}
