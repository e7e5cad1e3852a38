#include "test_util.hpp"

#include <set>

namespace marssl {
namespace {

TEST(TwoCluster, SizesMatchConfig) {
  TwoClusterConfig cfg;
  cfg.n_labeled = 37;
  cfg.n_unlabeled = 211;
  cfg.dim = 3;
  const auto sc = gen_two_cluster_mar(cfg);
  EXPECT_EQ(sc.labeled.size(), 37);
  EXPECT_EQ(sc.unlabeled.size(), 211);
  EXPECT_EQ(sc.labeled.dim(), 3);
  EXPECT_EQ(sc.unlabeled_truth.size(), 211u);
  EXPECT_EQ(sc.unlabeled_far.size(), 211u);
}

TEST(TwoCluster, InvalidConfigRejected) {
  TwoClusterConfig cfg;
  cfg.noise_scale = 0.0;
  EXPECT_THROW(gen_two_cluster_mar(cfg), Error);
  cfg = {};
  cfg.n_labeled = 0;
  EXPECT_THROW(gen_two_cluster_mar(cfg), Error);
  cfg = {};
  cfg.class_boundary_axis = 2;
  EXPECT_THROW(gen_two_cluster_mar(cfg), Error);
}

TEST(TwoCluster, ZeroSeparationIsMcar) {
  TwoClusterConfig cfg;
  cfg.cluster_separation = 0.0;
  cfg.n_labeled = 4000;
  cfg.n_unlabeled = 4000;
  cfg.seed = 3;
  const auto sc = gen_two_cluster_mar(cfg);
  for (int j = 0; j < 2; ++j) {
    const double a = sc.labeled.features.col(j).mean();
    const double b = sc.unlabeled.features.col(j).mean();
    const double se = std::sqrt(1.0 / 4000.0 + 1.0 / 4000.0);
    EXPECT_LT(std::abs(a - b), 3.0 * se);
  }
}

TEST(TwoCluster, LabeledPointsComeFromNearClusterOnly) {
  TwoClusterConfig cfg;
  cfg.seed = 4;
  const auto sc = gen_two_cluster_mar(cfg);
  EXPECT_LT(sc.labeled.features.col(cfg.separation_axis()).mean(), -4.0);
  const auto far = std::count(sc.unlabeled_far.begin(), sc.unlabeled_far.end(), true);
  EXPECT_NEAR(static_cast<double>(far) / 5000.0, 0.5, 0.03);
  for (Label y : sc.labeled.labels) EXPECT_TRUE(y == 0 || y == 1);
}

TEST(TwoCluster, OracleErrorMatchesClosedForm) {
  for (double noise : {0.1, 0.5, 1.0}) {
    TwoClusterConfig cfg;
    cfg.noise_scale = noise;
    const auto s = sample_two_cluster(cfg, 10000, 0.5, 5);
    std::size_t wrong = 0;
    for (Eigen::Index i = 0; i < s.features.rows(); ++i)
      wrong += bayes_prediction(cfg, s.features.row(i).transpose()).label != s.labels[static_cast<std::size_t>(i)];
    // Independent oracle: P(sign t != sign(t + noise e)) for t, e ~ N(0,1), by quadrature.
    double oracle = 0.0;
    const double h = 1e-3;
    for (double t = h / 2; t < 10.0; t += h)
      oracle += 2.0 * std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi) * 0.5 * std::erfc(t / noise / std::sqrt(2.0)) * h;
    EXPECT_NEAR(two_cluster_bayes_error(cfg), oracle, 1e-6);
    EXPECT_NEAR(static_cast<double>(wrong) / 10000.0, oracle, 0.02);
  }
}

TEST(TwoCluster, SameLabelRuleForLabeledAndUnlabeled) {
  // Near-zero noise makes the label a deterministic function of x.
  TwoClusterConfig cfg;
  cfg.noise_scale = 1e-12;
  cfg.seed = 6;
  const auto sc = gen_two_cluster_mar(cfg);
  const auto rule = [&](const Vector& x) { return boundary_coordinate(cfg, x) > 0.0 ? 1 : 0; };
  for (Eigen::Index i = 0; i < sc.labeled.size(); ++i)
    EXPECT_EQ(sc.labeled.labels[static_cast<std::size_t>(i)], rule(sc.labeled.features.row(i).transpose()));
  for (Eigen::Index i = 0; i < sc.unlabeled.size(); ++i)
    EXPECT_EQ(sc.unlabeled_truth[static_cast<std::size_t>(i)], rule(sc.unlabeled.features.row(i).transpose()));
}

TEST(TwoCluster, SeedDeterminism) {
  TwoClusterConfig cfg;
  cfg.seed = 8;
  const auto a = gen_two_cluster_mar(cfg), b = gen_two_cluster_mar(cfg);
  EXPECT_EQ(a.labeled.features, b.labeled.features);
  EXPECT_EQ(a.unlabeled.features, b.unlabeled.features);
  EXPECT_EQ(a.unlabeled_truth, b.unlabeled_truth);
  cfg.seed = 9;
  EXPECT_NE(gen_two_cluster_mar(cfg).labeled.features, a.labeled.features);
}

std::pair<FeatureMatrix, std::vector<Label>> balanced(std::size_t n, int classes) {
  BlobConfig cfg;
  cfg.n = n;
  cfg.n_classes = classes;
  cfg.dim = 2;
  return gen_class_blobs(cfg);
}

TEST(MarSplit, PaperProtocolSizes) {
  const auto [x, y] = balanced(60000, 10);
  const auto s = mar_split_by_class(x, y, MarSplitConfig{{0, 1, 7}, 1000, 0.01, 1});
  EXPECT_EQ(s.labeled.size(), 1000);
  EXPECT_EQ(s.unlabeled.size(), 59000);
  EXPECT_EQ(s.unlabeled_truth.size(), 59000u);
}

TEST(MarSplit, PartitionsSourceRows) {
  const auto [x, y] = balanced(3000, 4);
  const auto s = mar_split_by_class(x, y, MarSplitConfig{{2}, 300, 0.1, 2});
  std::set<std::size_t> all(s.labeled_indices.begin(), s.labeled_indices.end());
  for (auto i : s.unlabeled_indices) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 3000u);
  for (std::size_t k = 0; k < s.labeled_indices.size(); ++k) {
    EXPECT_EQ(s.labeled.labels[k], y[s.labeled_indices[k]]);
    EXPECT_EQ(s.labeled.features.row(static_cast<Eigen::Index>(k)), x.row(static_cast<Eigen::Index>(s.labeled_indices[k])));
  }
  for (std::size_t k = 0; k < s.unlabeled_indices.size(); ++k) EXPECT_EQ(s.unlabeled_truth[k], y[s.unlabeled_indices[k]]);
}

TEST(MarSplit, NoRareLabelsIsUniform) {
  const auto [x, y] = balanced(10000, 4);
  const auto s = mar_split_by_class(x, y, MarSplitConfig{{}, 2000, 0.0, 3});
  const auto counts = detail::count_labels(s.labeled.labels, s.labeled.label_set);
  const double p = 0.25, n = 2000.0;
  for (auto c : counts) EXPECT_LT(std::abs(static_cast<double>(c) - n * p), 3.0 * std::sqrt(n * p * (1 - p)) + 1.0);
}

TEST(MarSplit, RareLabelCountsWithinBinomialBand) {
  const auto [x, y] = balanced(60000, 10);
  const std::vector<Label> rare{0, 1, 7};
  const double frac = 0.01;
  // Oracle: each draw picks a class with probability proportional to its total weight.
  const double total_weight = 6000.0 * (7.0 + 3.0 * frac);
  const int seeds = 20;
  const double n = 1000.0 * seeds;
  std::vector<double> counts(10, 0.0);
  for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(seeds); ++seed) {
    const auto s = mar_split_by_class(x, y, MarSplitConfig{rare, 1000, frac, seed});
    const auto c = detail::count_labels(s.labeled.labels, s.labeled.label_set);
    for (std::size_t k = 0; k < 10; ++k) counts[k] += static_cast<double>(c[k]);
  }
  for (int c = 0; c < 10; ++c) {
    const bool is_rare = std::find(rare.begin(), rare.end(), c) != rare.end();
    const double p = 6000.0 * (is_rare ? frac : 1.0) / total_weight;
    const double sd = std::sqrt(n * p * (1.0 - p));
    EXPECT_LE(std::abs(counts[static_cast<std::size_t>(c)] - n * p), 3.0 * sd) << "class " << c;
  }
}

TEST(MarSplit, ZeroFractionExcludesRareLabels) {
  const auto [x, y] = balanced(2000, 4);
  const auto s = mar_split_by_class(x, y, MarSplitConfig{{3}, 500, 0.0, 4});
  for (Label l : s.labeled.labels) EXPECT_NE(l, 3);
  EXPECT_EQ(s.labeled.label_set.size(), 4u);
}

TEST(MarSplit, InsufficientDataAndDeterminism) {
  const auto [x, y] = balanced(100, 4);
  try {
    mar_split_by_class(x, y, MarSplitConfig{{0, 1, 2}, 50, 0.0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
  EXPECT_THROW(mar_split_by_class(x, y, MarSplitConfig{{}, 100, 0.0, 1}), Error);
  const auto a = mar_split_by_class(x, y, MarSplitConfig{{1}, 30, 0.2, 5});
  const auto b = mar_split_by_class(x, y, MarSplitConfig{{1}, 30, 0.2, 5});
  EXPECT_EQ(a.labeled_indices, b.labeled_indices);
}

}  // namespace
}  // namespace marssl
