#pragma once

// Semi-supervised generative classification when labels are missing at random.
//
// fit_mar runs the selective label-sampling pipeline:
//   1. initial class densities from D1, unlabeled density from D0;
//   2. unlabeled points passing the likelihood-ratio test get a label drawn
//      from the initial class posterior and join D' (which starts as D1);
//      the rest form D'';
//   3. class densities and prior are refit on D', the class-independent
//      unlabeled density on D'';
//   4. the classifier mixes both with w = |D'| / (|D'| + |D''|):
//        q(x|y) = w q(x|y,l=1) + (1-w) q(x|l=0)
//        q(y)   = w q(y|l=1)   + (1-w) / |Y|
// With the unlabeled density class-independent and its label prior uniform,
// the likelihood objective splits into two independent fits, so step 3 is exact.

#include "marssl/density.hpp"
#include "marssl/partition.hpp"


namespace marssl {

struct LabeledSet {
  FeatureMatrix features;
  std::vector<Label> labels;
  std::vector<Label> label_set;  // sorted, unique

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  void validate() const {
    require(static_cast<Eigen::Index>(labels.size()) == features.rows(), ErrorCode::LengthMismatch,
            "label count differs from feature rows");
    require(std::is_sorted(label_set.begin(), label_set.end()) &&
                std::adjacent_find(label_set.begin(), label_set.end()) == label_set.end(),
            ErrorCode::InvalidArgument, "label_set must be sorted and unique");
    for (Label y : labels)
      require(std::binary_search(label_set.begin(), label_set.end(), y), ErrorCode::InvalidArgument,
              "label " + std::to_string(y) + " not in label set");
    require(features.allFinite(), ErrorCode::InvalidArgument, "labeled features contain non-finite entries");
  }
};

/// Builds a LabeledSet; the label set defaults to the distinct labels present.
inline LabeledSet make_labeled(FeatureMatrix features, std::vector<Label> labels, std::vector<Label> label_set = {}) {
  if (label_set.empty()) label_set = labels;
  std::sort(label_set.begin(), label_set.end());
  label_set.erase(std::unique(label_set.begin(), label_set.end()), label_set.end());
  LabeledSet out{std::move(features), std::move(labels), std::move(label_set)};
  out.validate();
  return out;
}

struct UnlabeledSet {
  FeatureMatrix features;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

enum class Method { Mar, Mcar, Supervised };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Mar: return "mar";
    case Method::Mcar: return "mcar";
    case Method::Supervised: return "supervised";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "mar") return Method::Mar;
  if (s == "mcar") return Method::Mcar;
  if (s == "supervised") return Method::Supervised;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + s + "' (expected mar, mcar or supervised)");
}

struct Prediction {
  Label label = 0;
  std::vector<double> posterior;
  double error_prob = 0.0;
  bool in_region = false;
  std::vector<double> log_marginals;  // ln q(x|y) q(y)
};

/// Output of any of the three fitting modes; predict is shared.
class MarModel {
 public:
  MarModel(RegionTest region, std::vector<double> class_prior, std::size_t augmented_count, std::size_t residual_count,
           Method method = Method::Mar, std::vector<std::size_t> class_counts = {})
      : region_(std::move(region)),
        class_prior_(std::move(class_prior)),
        augmented_(augmented_count),
        residual_(residual_count),
        method_(method),
        class_counts_(std::move(class_counts)) {
    require(class_prior_.size() == region_.labels().size(), ErrorCode::LengthMismatch, "prior size != label count");
    double s = 0.0;
    for (double p : class_prior_) {
      require(p >= 0.0 && std::isfinite(p), ErrorCode::InvalidArgument, "invalid class prior entry");
      s += p;
    }
    require(std::abs(s - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "class prior must sum to 1");
    require(augmented_ + residual_ > 0, ErrorCode::EmptyData, "model built from no data");
    if (class_counts_.empty()) class_counts_.assign(class_prior_.size(), 0);
    require(class_counts_.size() == class_prior_.size(), ErrorCode::LengthMismatch, "class count size mismatch");
  }

  const RegionTest& region() const noexcept { return region_; }
  const std::vector<Label>& label_set() const noexcept { return region_.labels(); }
  const std::vector<GmmDensity>& class_densities() const noexcept { return region_.class_densities(); }
  const GmmDensity& unlabeled_density() const noexcept { return region_.unlabeled_density(); }
  const std::vector<double>& class_prior() const noexcept { return class_prior_; }
  const std::vector<std::size_t>& class_counts() const noexcept { return class_counts_; }
  double kappa() const noexcept { return region_.kappa(); }
  std::size_t augmented_count() const noexcept { return augmented_; }
  std::size_t residual_count() const noexcept { return residual_; }
  Method method() const noexcept { return method_; }
  Eigen::Index dim() const noexcept { return region_.dim(); }

  double w() const noexcept {
    return static_cast<double>(augmented_) / static_cast<double>(augmented_ + residual_);
  }

  MarModel with_class_prior(std::vector<double> prior) const {
    return MarModel(region_, std::move(prior), augmented_, residual_, method_, class_counts_);
  }

  /// Classifier output and learned error probability, all in log space.
  Prediction predict(const Eigen::Ref<const Vector>& x) const {
    require(x.size() == dim(), ErrorCode::DimMismatch,
            "expected dimension " + std::to_string(dim()) + ", got " + std::to_string(x.size()));
    const double weight = w();
    const double log_w = std::log(weight);
    const double log_1mw = residual_ == 0 ? -std::numeric_limits<double>::infinity() : std::log1p(-weight);
    const double k = static_cast<double>(class_prior_.size());
    const double log_unlabeled = region_.unlabeled_density().log_density(x);

    Prediction p;
    const std::size_t n_labels = class_prior_.size();
    p.log_marginals.resize(n_labels);
    double best_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < n_labels; ++y) {
      const double log_labeled = region_.class_densities()[y].log_density(x);
      // With no residual set the unlabeled term carries zero weight.
      const double log_px = residual_ == 0 ? log_labeled : log_sum_exp(log_w + log_labeled, log_1mw + log_unlabeled);
      const double prior = weight * class_prior_[y] + (1.0 - weight) / k;
      p.log_marginals[y] = log_px + std::log(prior);
      best_ratio = std::max(best_ratio, log_labeled - log_unlabeled);
    }
    const double norm = log_sum_exp(std::span<const double>(p.log_marginals));
    p.posterior.resize(n_labels);
    std::size_t arg = 0;
    for (std::size_t y = 0; y < n_labels; ++y) {
      p.posterior[y] = std::exp(p.log_marginals[y] - norm);
      if (p.log_marginals[y] > p.log_marginals[arg]) arg = y;
    }
    p.label = region_.labels()[arg];
    p.error_prob = 1.0 - p.posterior[arg];
    p.in_region = best_ratio > region_.kappa();
    return p;
  }

  double error_probability(const Eigen::Ref<const Vector>& x) const { return predict(x).error_prob; }

  std::vector<Prediction> predict_rows(const FeatureMatrix& data) const {
    std::vector<Prediction> out;
    out.reserve(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) out.push_back(predict(data.row(i).transpose()));
    return out;
  }

 private:
  RegionTest region_;
  std::vector<double> class_prior_;
  std::size_t augmented_;
  std::size_t residual_;
  Method method_;
  std::vector<std::size_t> class_counts_;
};

inline Prediction predict(const MarModel& model, const Eigen::Ref<const Vector>& x) { return model.predict(x); }
inline double error_probability(const MarModel& model, const Eigen::Ref<const Vector>& x) {
  return model.error_probability(x);
}

struct SslOptions {
  VbConfig vb;
  /// Classes with fewer rows than this factor times d get a single Gaussian.
  int min_class_samples_per_dim = 3;
};

struct FitLog {
  std::vector<Warning> warnings;
  std::size_t augmented = 0;
  std::size_t residual = 0;
};

namespace detail {

enum SeedStream : std::uint64_t { kInitStream = 1, kSamplingStream = 2, kFitStream = 3 };
inline constexpr std::uint64_t kUnlabeledSubstream = 1u << 20;

inline void warn(FitLog* log, ErrorCode code, std::string msg) {
  if (log) log->warnings.push_back({code, std::move(msg)});
}

/// VB fit with a small-sample fast path.
inline GmmDensity fit_density(const FeatureMatrix& rows, const SslOptions& opt, std::uint64_t seed, FitLog* log) {
  const Eigen::Index min_rows = std::max<Eigen::Index>(2, opt.min_class_samples_per_dim * rows.cols());
  if (rows.rows() < min_rows) return fit_gaussian(rows, opt.vb.reg_floor);
  VbConfig cfg = opt.vb;
  cfg.seed = seed;
  VbResult r = fit_vb_gmm_traced(rows, cfg);
  for (auto& w : r.warnings) warn(log, w.code, w.message);
  return std::move(r.density);
}

inline std::vector<std::size_t> count_labels(const std::vector<Label>& labels, const std::vector<Label>& label_set) {
  std::vector<std::size_t> counts(label_set.size(), 0);
  for (Label y : labels) {
    const auto it = std::lower_bound(label_set.begin(), label_set.end(), y);
    ++counts[static_cast<std::size_t>(it - label_set.begin())];
  }
  return counts;
}

/// Empirical label frequencies; add-one smoothing over every label only when some label is absent.
inline std::vector<double> class_prior_from_counts(const std::vector<std::size_t>& counts) {
  const bool any_empty = std::find(counts.begin(), counts.end(), std::size_t{0}) != counts.end();
  const double add = any_empty ? 1.0 : 0.0;
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c) + add;
  std::vector<double> prior;
  for (auto c : counts) prior.push_back((static_cast<double>(c) + add) / total);
  return prior;
}

struct ClassModels {
  std::vector<GmmDensity> densities;
  std::vector<std::size_t> counts;
  std::vector<double> prior;
};

/// Per-class densities and prior on a labeled set; absent labels fall back to
/// the pooled single Gaussian.
inline ClassModels fit_class_models(const LabeledSet& data, const SslOptions& opt, std::uint64_t seed, FitLog* log) {
  ClassModels out;
  out.counts = count_labels(data.labels, data.label_set);
  out.prior = class_prior_from_counts(out.counts);
  std::optional<GmmDensity> pooled;
  for (std::size_t c = 0; c < data.label_set.size(); ++c) {
    if (out.counts[c] == 0) {
      warn(log, ErrorCode::EmptyClass,
           "label " + std::to_string(data.label_set[c]) + " has no rows; using the pooled single-Gaussian density");
      if (!pooled) pooled = fit_gaussian(data.features, opt.vb.reg_floor);
      out.densities.push_back(*pooled);
      continue;
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.labels.size(); ++i)
      if (data.labels[i] == data.label_set[c]) idx.push_back(i);
    out.densities.push_back(fit_density(select_rows(data.features, idx), opt, mix_seed(seed, c), log));
  }
  return out;
}

inline void check_inputs(const LabeledSet& d1, const UnlabeledSet& d0, bool need_d0) {
  d1.validate();
  require(d1.size() >= 1, ErrorCode::EmptyData, "labeled set is empty");
  require(!need_d0 || d0.size() >= 1, ErrorCode::EmptyData, "unlabeled set is empty");
  require(d0.size() == 0 || d0.dim() == d1.dim(), ErrorCode::DimMismatch, "labeled and unlabeled dimensions differ");
  require(d0.features.allFinite(), ErrorCode::InvalidArgument, "unlabeled features contain non-finite entries");
}

}  // namespace detail

/// Initial models: class densities from D1, unlabeled density from D0.
inline RegionTest fit_initial_models(const LabeledSet& d1, const UnlabeledSet& d0, const SslOptions& opt,
                                     double kappa = 0.0, FitLog* log = nullptr) {
  detail::check_inputs(d1, d0, true);
  auto classes = detail::fit_class_models(d1, opt, opt.vb.seed, log);
  GmmDensity unlabeled = detail::fit_density(d0.features, opt, mix_seed(opt.vb.seed, detail::kUnlabeledSubstream), log);
  return RegionTest(d1.label_set, std::move(classes.densities), std::move(unlabeled), kappa);
}

/// Splits D0 into pseudo-labeled region points (appended to a copy of D1) and the residual set.
inline std::pair<LabeledSet, UnlabeledSet> selective_label_sample(const RegionTest& region, const LabeledSet& d1,
                                                                  const UnlabeledSet& d0, std::uint64_t seed,
                                                                  bool accept_all = false) {
  detail::check_inputs(d1, d0, false);
  require(region.labels() == d1.label_set, ErrorCode::InvalidArgument, "region labels differ from the labeled set's");
  require(d1.dim() == region.dim(), ErrorCode::DimMismatch, "region and data dimensions differ");

  const auto prior = detail::class_prior_from_counts(detail::count_labels(d1.labels, d1.label_set));
  std::vector<double> log_prior;
  for (double p : prior) log_prior.push_back(std::log(p));

  Rng rng(seed);
  std::vector<std::size_t> accepted, rejected;
  std::vector<Label> drawn;
  const std::size_t k = region.labels().size();
  std::vector<double> log_w(k);
  for (Eigen::Index i = 0; i < d0.size(); ++i) {
    const Vector x = d0.features.row(i).transpose();
    if (!accept_all && !region.in_region(x)) {
      rejected.push_back(static_cast<std::size_t>(i));
      continue;
    }
    for (std::size_t y = 0; y < k; ++y) log_w[y] = region.class_densities()[y].log_density(x) + log_prior[y];
    drawn.push_back(region.labels()[sample_log_categorical(log_w, rng)]);
    accepted.push_back(static_cast<std::size_t>(i));
  }

  LabeledSet augmented{vstack(d1.features, select_rows(d0.features, accepted)), d1.labels, d1.label_set};
  if (augmented.features.rows() == 0) augmented.features.resize(0, d1.dim());
  augmented.labels.insert(augmented.labels.end(), drawn.begin(), drawn.end());
  UnlabeledSet residual{select_rows(d0.features, rejected)};
  return {std::move(augmented), std::move(residual)};
}

namespace detail {

inline MarModel refit(const LabeledSet& augmented, const UnlabeledSet& residual, const SslOptions& opt,
                      std::uint64_t master_seed, double kappa, Method method, FitLog* log) {
  const std::uint64_t fit_seed = mix_seed(master_seed, kFitStream);
  auto classes = fit_class_models(augmented, opt, fit_seed, log);
  GmmDensity unlabeled = residual.size() == 0
                             ? fit_gaussian(augmented.features, opt.vb.reg_floor)
                             : fit_density(residual.features, opt, mix_seed(fit_seed, kUnlabeledSubstream), log);
  if (log) {
    log->augmented = static_cast<std::size_t>(augmented.size());
    log->residual = static_cast<std::size_t>(residual.size());
  }
  return MarModel(RegionTest(augmented.label_set, std::move(classes.densities), std::move(unlabeled), kappa),
                  std::move(classes.prior), static_cast<std::size_t>(augmented.size()),
                  static_cast<std::size_t>(residual.size()), method, std::move(classes.counts));
}

inline MarModel fit_augmented(const LabeledSet& d1, const UnlabeledSet& d0, double kappa, const SslOptions& opt,
                              std::uint64_t seed, bool accept_all, Method method, FitLog* log) {
  SslOptions init_opt = opt;
  init_opt.vb.seed = mix_seed(seed, kInitStream);
  const RegionTest initial = fit_initial_models(d1, d0, init_opt, kappa, log);
  auto [augmented, residual] = selective_label_sample(initial, d1, d0, mix_seed(seed, kSamplingStream), accept_all);
  return refit(augmented, residual, opt, seed, accept_all ? -std::numeric_limits<double>::infinity() : kappa, method,
               log);
}

}  // namespace detail

/// Proposed method: selective label-sampling under MAR.
inline MarModel fit_mar(const LabeledSet& d1, const UnlabeledSet& d0, double kappa, const SslOptions& opt,
                        std::uint64_t seed, FitLog* log = nullptr) {
  detail::check_inputs(d1, d0, true);
  require(!std::isnan(kappa), ErrorCode::InvalidArgument, "kappa is NaN");
  return detail::fit_augmented(d1, d0, kappa, opt, seed, false, Method::Mar, log);
}

/// Supervised baseline: class models from D1 only, w = 1.
inline MarModel fit_supervised(const LabeledSet& d1, const SslOptions& opt, std::uint64_t seed, FitLog* log = nullptr) {
  detail::check_inputs(d1, UnlabeledSet{FeatureMatrix(0, d1.dim())}, false);
  return detail::refit(d1, UnlabeledSet{FeatureMatrix(0, d1.dim())}, opt, seed,
                       -std::numeric_limits<double>::infinity(), Method::Supervised, log);
}

/// MCAR self-training baseline: every unlabeled point is label-sampled, w = 1.
inline MarModel fit_mcar_selftrain(const LabeledSet& d1, const UnlabeledSet& d0, const SslOptions& opt,
                                   std::uint64_t seed, FitLog* log = nullptr) {
  detail::check_inputs(d1, d0, false);
  if (d0.size() == 0) {
    MarModel m = fit_supervised(d1, opt, seed, log);
    return MarModel(m.region(), m.class_prior(), m.augmented_count(), 0, Method::Mcar, m.class_counts());
  }
  return detail::fit_augmented(d1, d0, 0.0, opt, seed, true, Method::Mcar, log);
}

inline MarModel fit(Method method, const LabeledSet& d1, const UnlabeledSet& d0, double kappa, const SslOptions& opt,
                    std::uint64_t seed, FitLog* log = nullptr) {
  switch (method) {
    case Method::Mar: return fit_mar(d1, d0, kappa, opt, seed, log);
    case Method::Mcar: return fit_mcar_selftrain(d1, d0, opt, seed, log);
    case Method::Supervised: return fit_supervised(d1, opt, seed, log);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace marssl
