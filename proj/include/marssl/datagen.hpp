#pragma once

// Synthetic scenarios with known ground truth.
//
// Two-cluster scenario: features come from two unit-variance Gaussian clusters
// centred at -sep/2 and +sep/2 along the separation axis s (the first axis
// that is not the class boundary axis b). Labels are drawn from one posterior
// shared by every point,
//     p(y=1|x) = Phi(t(x) / noise_scale),
//     t(x) = x_b               on the labeled cluster's side (x_s <= 0),
//     t(x) = x_s - sep/2       on the far side,
// so p(y|x) does not depend on whether x was labeled (MAR), while the far
// cluster's split cannot be extrapolated from the labeled cluster. Labeled
// points come from the near cluster only.

#include "marssl/ssl.hpp"

#include <set>

namespace marssl {

struct TwoClusterConfig {
  std::size_t n_labeled = 500;
  std::size_t n_unlabeled = 5000;
  double cluster_separation = 10.0;
  int class_boundary_axis = 1;
  double noise_scale = 0.1;
  int dim = 2;
  /// Share of unlabeled points drawn from the far (never labeled) cluster.
  double far_fraction = 0.5;
  std::uint64_t seed = 0;

  int separation_axis() const { return class_boundary_axis == 0 ? 1 : 0; }

  void validate() const {
    require(n_labeled >= 1 && n_unlabeled >= 1, ErrorCode::InvalidArgument, "counts must be >= 1");
    require(noise_scale > 0.0, ErrorCode::InvalidArgument, "noise_scale must be > 0");
    require(dim >= 2, ErrorCode::InvalidArgument, "two-cluster scenario needs dim >= 2");
    require(class_boundary_axis >= 0 && class_boundary_axis < dim, ErrorCode::InvalidArgument,
            "class_boundary_axis out of range");
    require(cluster_separation >= 0.0 && std::isfinite(cluster_separation), ErrorCode::InvalidArgument,
            "cluster_separation must be finite and >= 0");
    require(far_fraction >= 0.0 && far_fraction <= 1.0, ErrorCode::InvalidArgument, "far_fraction must be in [0,1]");
  }
};

/// Signed distance to the local class boundary.
inline double boundary_coordinate(const TwoClusterConfig& cfg, const Eigen::Ref<const Vector>& x) {
  const double xs = x[cfg.separation_axis()];
  return xs <= 0.0 ? x[cfg.class_boundary_axis] : xs - 0.5 * cfg.cluster_separation;
}

/// Ground-truth p(y=1|x); the same function labels every generated point.
inline double true_posterior(const TwoClusterConfig& cfg, const Eigen::Ref<const Vector>& x) {
  return normal_cdf(boundary_coordinate(cfg, x) / cfg.noise_scale);
}

/// Bayes-optimal prediction and its true error probability.
inline Prediction bayes_prediction(const TwoClusterConfig& cfg, const Eigen::Ref<const Vector>& x) {
  const double p1 = true_posterior(cfg, x);
  Prediction p;
  p.label = p1 > 0.5 ? 1 : 0;
  p.posterior = {1.0 - p1, p1};
  p.error_prob = std::min(p1, 1.0 - p1);
  return p;
}

/// Closed-form Bayes error of the scenario: t ~ N(0,1) per cluster, so
/// P(sign(t) != sign(t + noise*eps)) = atan(noise)/pi.
inline double two_cluster_bayes_error(const TwoClusterConfig& cfg) {
  return std::atan(cfg.noise_scale) / std::numbers::pi;
}

struct TwoClusterSample {
  FeatureMatrix features;
  std::vector<Label> labels;
  std::vector<bool> far;  // drawn from the never-labeled cluster
};

namespace detail {

inline void draw_two_cluster_points(const TwoClusterConfig& cfg, std::size_t n, double far_fraction, Rng& rng,
                                    TwoClusterSample& out, std::size_t offset) {
  const int s = cfg.separation_axis();
  for (std::size_t i = 0; i < n; ++i) {
    const bool far = uniform01(rng) < far_fraction;
    Vector x(cfg.dim);
    for (int j = 0; j < cfg.dim; ++j) x[j] = standard_normal(rng);
    x[s] += (far ? 0.5 : -0.5) * cfg.cluster_separation;
    const Label y = uniform01(rng) < true_posterior(cfg, x) ? 1 : 0;
    out.features.row(static_cast<Eigen::Index>(offset + i)) = x.transpose();
    out.labels[offset + i] = y;
    out.far[offset + i] = far;
  }
}

}  // namespace detail

/// n points from the population (both clusters with the given far share).
inline TwoClusterSample sample_two_cluster(const TwoClusterConfig& cfg, std::size_t n, double far_fraction,
                                           std::uint64_t seed) {
  cfg.validate();
  TwoClusterSample out{FeatureMatrix(static_cast<Eigen::Index>(n), cfg.dim), std::vector<Label>(n), std::vector<bool>(n)};
  Rng rng(seed);
  detail::draw_two_cluster_points(cfg, n, far_fraction, rng, out, 0);
  return out;
}

struct MarScenario {
  LabeledSet labeled;
  UnlabeledSet unlabeled;
  std::vector<Label> unlabeled_truth;
  std::vector<bool> unlabeled_far;
};

inline MarScenario gen_two_cluster_mar(const TwoClusterConfig& cfg) {
  cfg.validate();
  const auto lab = sample_two_cluster(cfg, cfg.n_labeled, 0.0, mix_seed(cfg.seed, 1));
  const auto unl = sample_two_cluster(cfg, cfg.n_unlabeled, cfg.far_fraction, mix_seed(cfg.seed, 2));
  MarScenario out;
  out.labeled = LabeledSet{lab.features, lab.labels, {0, 1}};
  out.unlabeled = UnlabeledSet{unl.features};
  out.unlabeled_truth = unl.labels;
  out.unlabeled_far = unl.far;
  return out;
}

struct MarSplitConfig {
  std::vector<Label> rare_labels;
  std::size_t n_labeled_total = 1000;
  /// Multiplier on the natural labeling rate of rare labels.
  double rare_label_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(rare_label_fraction >= 0.0 && rare_label_fraction < 1.0, ErrorCode::InvalidArgument,
            "rare_label_fraction must be in [0, 1)");
    require(n_labeled_total >= 1, ErrorCode::InvalidArgument, "n_labeled_total must be >= 1");
  }
};

struct MarSplit {
  LabeledSet labeled;
  UnlabeledSet unlabeled;
  std::vector<Label> unlabeled_truth;
  std::vector<std::size_t> labeled_indices;    // rows of the source, ascending
  std::vector<std::size_t> unlabeled_indices;  // rows of the source, ascending
};

/// Weighted sampling without replacement (exponential-key method): rows of
/// rare labels carry weight rare_label_fraction, others weight 1.
inline MarSplit mar_split_by_class(const FeatureMatrix& features, const std::vector<Label>& labels,
                                   const MarSplitConfig& cfg) {
  cfg.validate();
  require(static_cast<Eigen::Index>(labels.size()) == features.rows(), ErrorCode::LengthMismatch,
          "label count differs from feature rows");
  const std::set<Label> rare(cfg.rare_labels.begin(), cfg.rare_labels.end());
  std::size_t eligible = 0;
  for (Label y : labels) eligible += (!rare.contains(y) || cfg.rare_label_fraction > 0.0) ? 1 : 0;
  require(cfg.n_labeled_total <= eligible && cfg.n_labeled_total < labels.size(), ErrorCode::InsufficientData,
          "dataset too small for " + std::to_string(cfg.n_labeled_total) + " labeled points");

  Rng rng(cfg.seed);
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = rare.contains(labels[i]) ? cfg.rare_label_fraction : 1.0;
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    keys.emplace_back(w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity(), i);
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(cfg.n_labeled_total), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });

  std::vector<bool> chosen(labels.size(), false);
  for (std::size_t i = 0; i < cfg.n_labeled_total; ++i) chosen[keys[i].second] = true;

  MarSplit out;
  for (std::size_t i = 0; i < labels.size(); ++i) (chosen[i] ? out.labeled_indices : out.unlabeled_indices).push_back(i);
  std::vector<Label> lab_y;
  for (auto i : out.labeled_indices) lab_y.push_back(labels[i]);
  for (auto i : out.unlabeled_indices) out.unlabeled_truth.push_back(labels[i]);
  std::vector<Label> all = labels;
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  out.labeled = LabeledSet{select_rows(features, out.labeled_indices), std::move(lab_y), std::move(all)};
  out.unlabeled = UnlabeledSet{select_rows(features, out.unlabeled_indices)};
  return out;
}

struct BlobConfig {
  std::size_t n = 60000;
  int n_classes = 10;
  int dim = 20;
  double center_scale = 4.0;
  std::uint64_t seed = 0;
};

/// Balanced Gaussian class blobs; stands in for a raw-pixel dataset.
inline std::pair<FeatureMatrix, std::vector<Label>> gen_class_blobs(const BlobConfig& cfg) {
  require(cfg.n >= 1 && cfg.n_classes >= 1 && cfg.dim >= 1, ErrorCode::InvalidArgument, "invalid blob config");
  Rng rng(cfg.seed);
  Matrix centers(cfg.n_classes, cfg.dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = cfg.center_scale * standard_normal(rng);
  FeatureMatrix x(static_cast<Eigen::Index>(cfg.n), cfg.dim);
  std::vector<Label> y(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(cfg.n_classes));
    y[i] = c;
    for (int j = 0; j < cfg.dim; ++j) x(static_cast<Eigen::Index>(i), j) = centers(c, j) + standard_normal(rng);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace marssl
