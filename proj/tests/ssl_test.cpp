#include "test_util.hpp"

namespace marssl {
namespace {

using test_support::draw_gaussian;
using test_support::naive_gaussian_pdf;
using test_support::naive_mixture_pdf;
using test_support::vec2;

GmmDensity gaussian(const Vector& mean, double var = 1.0) {
  return GmmDensity({{1.0, mean, Matrix::Identity(mean.size(), mean.size()) * var}});
}

MarScenario scenario(std::uint64_t seed) {
  TwoClusterConfig cfg;
  cfg.seed = seed;
  return gen_two_cluster_mar(cfg);
}

/// Two separated classes along x, n per class.
LabeledSet two_class_set(Eigen::Index n, double sep, std::uint64_t seed) {
  const FeatureMatrix a = draw_gaussian(vec2(-sep / 2, 0), Matrix::Identity(2, 2), n, seed);
  const FeatureMatrix b = draw_gaussian(vec2(sep / 2, 0), Matrix::Identity(2, 2), n, seed + 1);
  std::vector<Label> y(static_cast<std::size_t>(2 * n), 0);
  std::fill(y.begin() + n, y.end(), 1);
  return make_labeled(vstack(a, b), y);
}

bool same_density(const GmmDensity& a, const GmmDensity& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto &ca = a.component(k), &cb = b.component(k);
    if (ca.weight != cb.weight || ca.mean != cb.mean || ca.covariance != cb.covariance) return false;
  }
  return true;
}

double accuracy_on(const MarModel& m, const FeatureMatrix& x, const std::vector<Label>& y) {
  const auto preds = m.predict_rows(x);
  return accuracy(preds, y);
}

TEST(FitInitialModels, SingleClassGivesOneDensity) {
  const auto d1 = make_labeled(draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2), 50, 1), std::vector<Label>(50, 4));
  const UnlabeledSet d0{draw_gaussian(vec2(1, 0), Matrix::Identity(2, 2), 80, 2)};
  const auto r = fit_initial_models(d1, d0, SslOptions{});
  ASSERT_EQ(r.class_densities().size(), 1u);
  EXPECT_EQ(r.labels(), std::vector<Label>{4});
}

TEST(FitInitialModels, SameFeaturesGiveRatioNearZeroOnAverage) {
  const auto d1 = two_class_set(1000, 4.0, 3);
  const UnlabeledSet d0{d1.features};
  const auto r = fit_initial_models(d1, d0, SslOptions{});
  // The max over classes inflates the statistic, so compare the true-class ratio.
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d1.size(); ++i) {
    const Vector x = d1.features.row(i).transpose();
    const auto y = static_cast<std::size_t>(d1.labels[static_cast<std::size_t>(i)]);
    sum += r.class_densities()[y].log_density(x) + std::log(0.5) - r.unlabeled_density().log_density(x);
  }
  EXPECT_LT(std::abs(sum / static_cast<double>(d1.size())), 0.5);
}

TEST(FitInitialModels, UnlabeledMassOutsideRegion) {
  const auto sc = scenario(1);
  const auto r = fit_initial_models(sc.labeled, sc.unlabeled, SslOptions{});
  const FeatureMatrix draws = sample(r.unlabeled_density(), 20000, 77);
  std::size_t outside = 0;
  for (Eigen::Index i = 0; i < draws.rows(); ++i) outside += r.in_region(draws.row(i).transpose()) ? 0 : 1;
  EXPECT_GE(static_cast<double>(outside) / 20000.0, 0.30);
}

TEST(FitInitialModels, DimMismatchAndEmptyClassWarning) {
  const auto d1 = make_labeled(draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2), 30, 1), std::vector<Label>(30, 0),
                               {0, 1});
  EXPECT_THROW(fit_initial_models(d1, UnlabeledSet{FeatureMatrix::Zero(5, 3)}, SslOptions{}), Error);
  FitLog log;
  const auto r = fit_initial_models(d1, UnlabeledSet{d1.features}, SslOptions{}, 0.0, &log);
  EXPECT_EQ(r.class_densities().size(), 2u);
  ASSERT_FALSE(log.warnings.empty());
  EXPECT_EQ(log.warnings.front().code, ErrorCode::EmptyClass);
}

TEST(SelectiveLabelSample, EmptyRegionKeepsSetsUnchanged) {
  const auto d1 = two_class_set(20, 4.0, 5);
  const UnlabeledSet d0{draw_gaussian(vec2(0, 5), Matrix::Identity(2, 2), 40, 6)};
  const RegionTest r = RegionTest(d1.label_set, {gaussian(vec2(-2, 0)), gaussian(vec2(2, 0))}, gaussian(vec2(0, 5)))
                           .with_kappa(std::numeric_limits<double>::infinity());
  const auto [dp, dpp] = selective_label_sample(r, d1, d0, 1);
  EXPECT_EQ(dp.features, d1.features);
  EXPECT_EQ(dp.labels, d1.labels);
  EXPECT_EQ(dpp.features, d0.features);
}

TEST(SelectiveLabelSample, AllInRegionEmptiesResidual) {
  const auto d1 = two_class_set(20, 4.0, 5);
  const UnlabeledSet d0{draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2), 40, 6)};
  const RegionTest r = RegionTest(d1.label_set, {gaussian(vec2(-2, 0)), gaussian(vec2(2, 0))}, gaussian(vec2(0, 5)))
                           .with_kappa(-std::numeric_limits<double>::infinity());
  const auto [dp, dpp] = selective_label_sample(r, d1, d0, 1);
  EXPECT_EQ(dpp.size(), 0);
  EXPECT_EQ(dp.size(), 80);
  const MarModel m(RegionTest(dp.label_set, {gaussian(vec2(-2, 0)), gaussian(vec2(2, 0))}, gaussian(vec2(0, 0))),
                   {0.5, 0.5}, static_cast<std::size_t>(dp.size()), static_cast<std::size_t>(dpp.size()));
  EXPECT_EQ(m.w(), 1.0);
}

TEST(SelectiveLabelSample, EqualLikelihoodDrawIsFair) {
  // Point on the symmetry axis of two mirror classes with a balanced labeled set.
  const auto d1 = make_labeled(FeatureMatrix::Zero(2, 2), {0, 1});
  FeatureMatrix x(10000, 2);
  x.setZero();
  const UnlabeledSet d0{x};
  const RegionTest r(d1.label_set, {gaussian(vec2(-1, 0)), gaussian(vec2(1, 0))}, gaussian(vec2(0, 30)));
  const auto [dp, dpp] = selective_label_sample(r, d1, d0, 12345);
  ASSERT_EQ(dp.size(), 10002);
  const auto ones = std::count(dp.labels.begin() + 2, dp.labels.end(), 1);
  EXPECT_NEAR(static_cast<double>(ones) / 10000.0, 0.5, 0.02);
}

TEST(SelectiveLabelSample, ConservationAndDeterminism) {
  const auto sc = scenario(2);
  const auto r = fit_initial_models(sc.labeled, sc.unlabeled, SslOptions{});
  const auto [a1, a0] = selective_label_sample(r, sc.labeled, sc.unlabeled, 9);
  const auto [b1, b0] = selective_label_sample(r, sc.labeled, sc.unlabeled, 9);
  EXPECT_EQ(a1.size() + a0.size(), sc.labeled.size() + sc.unlabeled.size());
  EXPECT_EQ(a1.labels, b1.labels);
  EXPECT_EQ(a0.features, b0.features);
}

TEST(MarModel, WeightIsExactRatio) {
  const MarModel m(RegionTest({0, 1}, {gaussian(vec2(-2, 0)), gaussian(vec2(2, 0))}, gaussian(vec2(0, 5))), {0.5, 0.5},
                   100, 900);
  EXPECT_EQ(m.w(), 0.1);
}

TEST(MarModel, InvalidConstruction) {
  const RegionTest r({0, 1}, {gaussian(vec2(-2, 0)), gaussian(vec2(2, 0))}, gaussian(vec2(0, 5)));
  EXPECT_THROW(MarModel(r, {0.5}, 1, 1), Error);
  EXPECT_THROW(MarModel(r, {0.6, 0.6}, 1, 1), Error);
  EXPECT_THROW(MarModel(r, {0.5, 0.5}, 0, 0), Error);
}

TEST(Predict, SymmetricModelOnAxis) {
  const MarModel m(RegionTest({0, 1}, {gaussian(vec2(-2, 0)), gaussian(vec2(2, 0))}, gaussian(vec2(0, 5))), {0.5, 0.5},
                   300, 700);
  const auto p = m.predict(vec2(0, 1.3));
  EXPECT_NEAR(p.posterior[0], 0.5, 1e-12);
  EXPECT_NEAR(p.error_prob, 0.5, 1e-12);
  EXPECT_EQ(p.label, 0);
}

TEST(Predict, SingleClassFullWeightIsCertain) {
  const MarModel m(RegionTest({3}, {gaussian(vec2(0, 0))}, gaussian(vec2(9, 9))), {1.0}, 10, 0);
  const auto p = m.predict(vec2(40, -7));
  EXPECT_EQ(p.label, 3);
  EXPECT_EQ(p.error_prob, 0.0);
}

TEST(Predict, DimMismatch) {
  const MarModel m(RegionTest({3}, {gaussian(vec2(0, 0))}, gaussian(vec2(9, 9))), {1.0}, 10, 0);
  EXPECT_THROW(m.predict(Vector::Zero(3)), Error);
}

TEST(Predict, UniformOverTenClassesGivesPointNine) {
  std::vector<Label> labels(10);
  std::iota(labels.begin(), labels.end(), 0);
  std::vector<GmmDensity> cls(10, gaussian(vec2(0, 0)));
  const MarModel m(RegionTest(labels, cls, gaussian(vec2(1, 1))), std::vector<double>(10, 0.1), 5, 5);
  EXPECT_NEAR(error_probability(m, vec2(0.3, -0.2)), 0.9, 1e-12);
}

TEST(Predict, BruteForcePosteriorOracle) {
  const auto sc = scenario(3);
  const MarModel m = fit_mar(sc.labeled, sc.unlabeled, 0.0, SslOptions{}, 3);
  const FeatureMatrix pts = draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2) * 16.0, 100, 4);
  const double w = m.w();
  const double k = static_cast<double>(m.label_set().size());
  int checked = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Vector x = pts.row(i).transpose();
    const double q0 = naive_mixture_pdf(m.unlabeled_density(), x);
    std::vector<double> joint;
    double total = 0.0;
    for (std::size_t y = 0; y < m.label_set().size(); ++y) {
      const double q1 = naive_mixture_pdf(m.class_densities()[y], x);
      joint.push_back((w * q1 + (1.0 - w) * q0) * (w * m.class_prior()[y] + (1.0 - w) / k));
      total += joint.back();
    }
    if (!(total > 1e-250)) continue;
    ++checked;
    const auto p = m.predict(x);
    for (std::size_t y = 0; y < joint.size(); ++y) EXPECT_NEAR(p.posterior[y], joint[y] / total, 1e-10);
  }
  EXPECT_GT(checked, 50);
}

TEST(Predict, InvariantsOnFittedModels) {
  const auto sc = scenario(4);
  const FeatureMatrix pts = draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2) * 25.0, 1000, 5);
  for (Method method : {Method::Mar, Method::Mcar, Method::Supervised}) {
    const MarModel m = fit(method, sc.labeled, sc.unlabeled, 0.0, SslOptions{}, 4);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      const Vector x = pts.row(i).transpose();
      const auto p = m.predict(x);
      double s = 0.0, mx = 0.0;
      for (double v : p.posterior) {
        s += v;
        mx = std::max(mx, v);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
      EXPECT_EQ(p.error_prob, 1.0 - mx);
      EXPECT_EQ(error_probability(m, x), p.error_prob);
      EXPECT_GE(p.error_prob, 0.0);
      EXPECT_LE(p.error_prob, 1.0);
    }
  }
}

TEST(FitMar, DeepUnlabeledRegionFallsToPrior) {
  const auto sc = scenario(6);
  const MarModel m = fit_mar(sc.labeled, sc.unlabeled, 0.0, SslOptions{}, 6);
  const double w = m.w();
  double floor = 0.0;
  for (double p : m.class_prior()) floor = std::max(floor, w * p + (1.0 - w) / 2.0);
  const auto far = sample_two_cluster(TwoClusterConfig{}, 2000, 1.0, 31);
  int deep = 0;
  for (Eigen::Index i = 0; i < far.features.rows(); ++i) {
    const Vector x = far.features.row(i).transpose();
    const double base = m.unlabeled_density().log_density(x);
    bool negligible = true;
    for (const auto& q : m.class_densities()) negligible = negligible && q.log_density(x) <= base - 30.0;
    if (!negligible) continue;
    ++deep;
    EXPECT_NEAR(m.error_probability(x), 1.0 - floor, 1e-6);
  }
  EXPECT_GT(deep, 1000);

  std::vector<double> uniform(m.class_prior().size(), 0.5);
  const MarModel u = m.with_class_prior(uniform);
  EXPECT_NEAR(u.error_probability(vec2(5, 0)), 0.5, 0.05);
}

TEST(FitMar, KappaMonotoneAugmentedSet) {
  const auto sc = scenario(7);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double kappa : {0.0, 0.5, 1.0, 2.0, 8.0}) {
    FitLog log;
    fit_mar(sc.labeled, sc.unlabeled, kappa, SslOptions{}, 7, &log);
    EXPECT_EQ(log.augmented + log.residual, static_cast<std::size_t>(sc.labeled.size() + sc.unlabeled.size()));
    EXPECT_LE(log.augmented, prev);
    prev = log.augmented;
  }
}

TEST(FitMar, KappaMonotoneRegionSubset) {
  // Same initial region at two thresholds: accepted D0 rows are nested.
  const auto sc = scenario(8);
  const auto r = fit_initial_models(sc.labeled, sc.unlabeled, SslOptions{});
  for (Eigen::Index i = 0; i < sc.unlabeled.size(); ++i) {
    const Vector x = sc.unlabeled.features.row(i).transpose();
    if (r.with_kappa(2.0).in_region(x)) {
      EXPECT_TRUE(r.in_region(x));
    }
  }
}

TEST(FitMar, LargeKappaReducesToSmoothedSupervised) {
  const auto sc = scenario(9);
  const MarModel mar = fit_mar(sc.labeled, sc.unlabeled, 1e6, SslOptions{}, 9);
  const MarModel sup = fit_supervised(sc.labeled, SslOptions{}, 9);
  EXPECT_EQ(mar.augmented_count(), static_cast<std::size_t>(sc.labeled.size()));
  EXPECT_EQ(mar.class_prior(), sup.class_prior());
  for (std::size_t y = 0; y < 2; ++y)
    EXPECT_TRUE(same_density(mar.class_densities()[y], sup.class_densities()[y]));
}

TEST(Baselines, MarWithMinusInfinityKappaEqualsMcar) {
  const auto sc = scenario(10);
  const MarModel a = fit_mar(sc.labeled, sc.unlabeled, -std::numeric_limits<double>::infinity(), SslOptions{}, 10);
  const MarModel b = fit_mcar_selftrain(sc.labeled, sc.unlabeled, SslOptions{}, 10);
  EXPECT_EQ(a.w(), 1.0);
  EXPECT_EQ(b.residual_count(), 0u);
  const auto test = sample_two_cluster(TwoClusterConfig{}, 500, 0.5, 11);
  for (Eigen::Index i = 0; i < test.features.rows(); ++i) {
    const Vector x = test.features.row(i).transpose();
    const auto pa = a.predict(x), pb = b.predict(x);
    EXPECT_EQ(pa.label, pb.label);
    EXPECT_EQ(pa.posterior, pb.posterior);
  }
}

TEST(Baselines, McarWithEmptyD0EqualsSupervised) {
  const auto d1 = two_class_set(100, 5.0, 12);
  const MarModel a = fit_mcar_selftrain(d1, UnlabeledSet{FeatureMatrix(0, 2)}, SslOptions{}, 1);
  const MarModel b = fit_supervised(d1, SslOptions{}, 1);
  const FeatureMatrix pts = draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2) * 9.0, 200, 13);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Vector x = pts.row(i).transpose();
    EXPECT_EQ(a.predict(x).posterior, b.predict(x).posterior);
  }
}

TEST(Baselines, McarIsOverconfidentOnFarCluster) {
  TwoClusterConfig cfg;
  cfg.seed = 14;
  const auto sc = gen_two_cluster_mar(cfg);
  const MarModel m = fit_mcar_selftrain(sc.labeled, sc.unlabeled, SslOptions{}, 14);
  const auto far = sample_two_cluster(cfg, 4000, 1.0, 15);
  const auto preds = m.predict_rows(far.features);
  double nominal = 0.0;
  for (const auto& p : preds) nominal += p.error_prob;
  nominal /= static_cast<double>(preds.size());
  EXPECT_LT(nominal, 0.2);
  EXPECT_NEAR(1.0 - accuracy(preds, far.labels), 0.5, 0.1);
}

TEST(Baselines, McarSplitAccuracyNotWorseThanSupervised) {
  // Labels missing completely at random: D1 and D0 from the same population.
  const auto pool = two_class_set(1500, 3.0, 16);
  const auto split = mar_split_by_class(pool.features, pool.labels, MarSplitConfig{{}, 200, 0.0, 17});
  const auto test = two_class_set(2000, 3.0, 18);
  const double sup = accuracy_on(fit_supervised(split.labeled, SslOptions{}, 1), test.features, test.labels);
  const double mcar =
      accuracy_on(fit_mcar_selftrain(split.labeled, split.unlabeled, SslOptions{}, 1), test.features, test.labels);
  EXPECT_GE(mcar, sup - 0.02);
}

TEST(FitSupervised, OneSamplePerClass) {
  const auto d1 = make_labeled(FeatureMatrix{{0.0, 0.0}, {3.0, 1.0}}, {0, 1});
  const MarModel m = fit_supervised(d1, SslOptions{}, 1);
  EXPECT_EQ(m.predict(vec2(-0.5, 0)).label, 0);
  EXPECT_EQ(m.predict(vec2(3.5, 1)).label, 1);
  EXPECT_EQ(m.w(), 1.0);
}

TEST(FitSupervised, SeparableClassesAccuracy) {
  const auto d1 = two_class_set(500, 6.0, 19);
  const auto test = two_class_set(2000, 6.0, 20);
  EXPECT_GE(accuracy_on(fit_supervised(d1, SslOptions{}, 1), test.features, test.labels), 0.95);
}

TEST(FitSupervised, ClassPriorIsEmpiricalFrequency) {
  std::vector<Label> y(100, 1);
  std::fill(y.begin(), y.begin() + 30, 0);
  const auto d1 = make_labeled(draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2), 100, 21), y);
  const MarModel m = fit_supervised(d1, SslOptions{}, 1);
  EXPECT_EQ(m.class_prior()[0], 0.3);
  EXPECT_EQ(m.class_prior()[1], 0.7);
}

TEST(FitSupervised, AbsentLabelGetsSmoothedPrior) {
  const auto d1 = make_labeled(draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2), 8, 22), std::vector<Label>(8, 0), {0, 1});
  FitLog log;
  const MarModel m = fit_supervised(d1, SslOptions{}, 1, &log);
  EXPECT_NEAR(m.class_prior()[1], 1.0 / 10.0, 1e-15);
  EXPECT_EQ(log.warnings.front().code, ErrorCode::EmptyClass);
}

TEST(Fit, SeedDeterminism) {
  const auto sc = scenario(23);
  const MarModel a = fit_mar(sc.labeled, sc.unlabeled, 0.0, SslOptions{}, 5);
  const MarModel b = fit_mar(sc.labeled, sc.unlabeled, 0.0, SslOptions{}, 5);
  EXPECT_EQ(a.augmented_count(), b.augmented_count());
  const FeatureMatrix pts = draw_gaussian(vec2(0, 0), Matrix::Identity(2, 2) * 16.0, 100, 24);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    EXPECT_EQ(a.predict(pts.row(i).transpose()).posterior, b.predict(pts.row(i).transpose()).posterior);
}

TEST(Fit, ParseMethod) {
  EXPECT_EQ(parse_method("mar"), Method::Mar);
  EXPECT_EQ(parse_method("mcar"), Method::Mcar);
  EXPECT_EQ(parse_method("supervised"), Method::Supervised);
  EXPECT_THROW(parse_method("em"), Error);
}

}  // namespace
}  // namespace marssl
