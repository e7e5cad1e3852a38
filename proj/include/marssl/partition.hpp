#pragma once

#include "marssl/density.hpp"

namespace marssl {

struct RatioResult {
  double value;  // max_y ln q(x|y,l=1) - ln q(x|l=0)
  Label label;   // maximizing label
  std::size_t index;
};

/// Likelihood-ratio test deciding whether x lies in the label-informative
/// region: some labeled class density beats the unlabeled density by more
/// than kappa (strictly).
class RegionTest {
 public:
  RegionTest(std::vector<Label> labels, std::vector<GmmDensity> labeled_class_densities, GmmDensity unlabeled_density,
             double kappa = 0.0)
      : labels_(std::move(labels)),
        class_densities_(std::move(labeled_class_densities)),
        unlabeled_(std::move(unlabeled_density)),
        kappa_(kappa) {
    require(!labels_.empty(), ErrorCode::InvalidArgument, "region test needs at least one label");
    require(labels_.size() == class_densities_.size(), ErrorCode::LengthMismatch, "one density per label required");
    require(!std::isnan(kappa_), ErrorCode::InvalidArgument, "kappa is NaN");
    for (const auto& q : class_densities_)
      require(q.dim() == unlabeled_.dim(), ErrorCode::DimMismatch, "labeled and unlabeled densities differ in dimension");
  }

  const std::vector<Label>& labels() const noexcept { return labels_; }
  const std::vector<GmmDensity>& class_densities() const noexcept { return class_densities_; }
  const GmmDensity& unlabeled_density() const noexcept { return unlabeled_; }
  double kappa() const noexcept { return kappa_; }
  Eigen::Index dim() const noexcept { return unlabeled_.dim(); }

  RegionTest with_kappa(double kappa) const {
    RegionTest copy = *this;
    require(!std::isnan(kappa), ErrorCode::InvalidArgument, "kappa is NaN");
    copy.kappa_ = kappa;
    return copy;
  }

  /// Ties go to the smallest label index.
  RatioResult log_likelihood_ratio(const Eigen::Ref<const Vector>& x) const {
    require(x.size() == dim(), ErrorCode::DimMismatch, "point dimension mismatch");
    const double base = unlabeled_.log_density(x);
    RatioResult best{-std::numeric_limits<double>::infinity(), labels_.front(), 0};
    for (std::size_t y = 0; y < labels_.size(); ++y) {
      const double v = class_densities_[y].log_density(x) - base;
      if (y == 0 || v > best.value) best = {v, labels_[y], y};
    }
    return best;
  }

  bool in_region(const Eigen::Ref<const Vector>& x) const { return log_likelihood_ratio(x).value > kappa_; }

 private:
  std::vector<Label> labels_;
  std::vector<GmmDensity> class_densities_;
  GmmDensity unlabeled_;
  double kappa_;
};

}  // namespace marssl
