#pragma once

#include "marssl/ssl.hpp"

#include <optional>

namespace marssl {

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::size_t errors = 0;
  double nominal_sum = 0.0;
  double mean_nominal = 0.0;              // NaN-free; 0 for empty bins
  std::optional<double> empirical_error;  // absent for empty bins
};

/// Reliability diagram on the error-probability axis.
struct ReliabilityDiagram {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
  double overall_accuracy = 0.0;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& b : bins) n += b.count;
    return n;
  }
};

struct ErrorSample {
  double error_prob;
  bool wrong;
};

namespace detail {

inline std::size_t bin_index(double q, std::size_t n_bins) {
  if (!(q > 0.0)) return 0;
  const auto i = static_cast<std::size_t>(q * static_cast<double>(n_bins));
  return std::min(i, n_bins - 1);
}

inline void finalize(ReliabilityDiagram& diag) {
  const std::size_t n = diag.total();
  double ece = 0.0;
  std::size_t errors = 0;
  for (auto& b : diag.bins) {
    errors += b.errors;
    if (b.count == 0) {
      b.mean_nominal = 0.0;
      b.empirical_error.reset();
      continue;
    }
    const double c = static_cast<double>(b.count);
    b.mean_nominal = b.nominal_sum / c;
    b.empirical_error = static_cast<double>(b.errors) / c;
    ece += c * std::abs(b.mean_nominal - *b.empirical_error);
  }
  diag.ece = n == 0 ? 0.0 : ece / static_cast<double>(n);
  diag.overall_accuracy = n == 0 ? 0.0 : 1.0 - static_cast<double>(errors) / static_cast<double>(n);
}

}  // namespace detail

/// Equal-width bins over [0, 1]; the last bin is closed on the right.
inline ReliabilityDiagram reliability_diagram(std::span<const ErrorSample> samples, std::size_t n_bins = 10) {
  require(n_bins >= 1, ErrorCode::InvalidArgument, "n_bins must be >= 1");
  ReliabilityDiagram diag;
  for (std::size_t i = 0; i < n_bins; ++i)
  {
    ReliabilityBin b;
    b.lo = static_cast<double>(i) / static_cast<double>(n_bins);
    b.hi = static_cast<double>(i + 1) / static_cast<double>(n_bins);
    diag.bins.push_back(b);
  }
  for (const auto& s : samples) {
    require(std::isfinite(s.error_prob), ErrorCode::InvalidArgument, "non-finite error probability");
    auto& b = diag.bins[detail::bin_index(s.error_prob, n_bins)];
    ++b.count;
    b.nominal_sum += s.error_prob;
    if (s.wrong) ++b.errors;
  }
  detail::finalize(diag);
  return diag;
}

inline std::vector<ErrorSample> error_samples(std::span<const Prediction> predictions, std::span<const Label> truth) {
  require(predictions.size() == truth.size(), ErrorCode::LengthMismatch,
          std::to_string(predictions.size()) + " predictions vs " + std::to_string(truth.size()) + " labels");
  std::vector<ErrorSample> out;
  out.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) out.push_back({predictions[i].error_prob, predictions[i].label != truth[i]});
  return out;
}

inline ReliabilityDiagram reliability_diagram(std::span<const Prediction> predictions, std::span<const Label> truth,
                                              std::size_t n_bins = 10) {
  require(!truth.empty(), ErrorCode::EmptyData, "reliability diagram needs at least one prediction");
  const auto samples = error_samples(predictions, truth);
  return reliability_diagram(std::span<const ErrorSample>(samples), n_bins);
}

/// Sums two diagrams with identical binning (e.g. computed on disjoint halves).
inline ReliabilityDiagram merge(const ReliabilityDiagram& a, const ReliabilityDiagram& b) {
  require(a.bins.size() == b.bins.size(), ErrorCode::LengthMismatch, "diagrams use different binning");
  ReliabilityDiagram out = a;
  for (std::size_t i = 0; i < a.bins.size(); ++i) {
    require(a.bins[i].lo == b.bins[i].lo && a.bins[i].hi == b.bins[i].hi, ErrorCode::InvalidArgument,
            "diagrams use different binning");
    out.bins[i].count += b.bins[i].count;
    out.bins[i].errors += b.bins[i].errors;
    out.bins[i].nominal_sum += b.bins[i].nominal_sum;
  }
  detail::finalize(out);
  return out;
}

struct RegionDecomposition {
  ReliabilityDiagram masked;    // e.g. rarely labeled features
  ReliabilityDiagram unmasked;  // remaining features
};

inline RegionDecomposition region_decomposed_errors(std::span<const Prediction> predictions, std::span<const Label> truth,
                                                    const std::vector<bool>& rare_mask, std::size_t n_bins = 10) {
  require(rare_mask.size() == truth.size(), ErrorCode::LengthMismatch, "mask length differs from label count");
  const auto samples = error_samples(predictions, truth);
  std::vector<ErrorSample> masked, unmasked;
  for (std::size_t i = 0; i < samples.size(); ++i) (rare_mask[i] ? masked : unmasked).push_back(samples[i]);
  return {reliability_diagram(std::span<const ErrorSample>(masked), n_bins),
          reliability_diagram(std::span<const ErrorSample>(unmasked), n_bins)};
}

inline double accuracy(std::span<const Prediction> predictions, std::span<const Label> truth) {
  require(predictions.size() == truth.size(), ErrorCode::LengthMismatch,
          std::to_string(predictions.size()) + " predictions vs " + std::to_string(truth.size()) + " labels");
  require(!truth.empty(), ErrorCode::EmptyData, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i].label == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Count-weighted mean nominal error and empirical error over all occupied bins.
struct GapSummary {
  std::size_t count = 0;
  double mean_nominal = 0.0;
  double empirical_error = 0.0;
};

inline GapSummary summarize(const ReliabilityDiagram& d) {
  GapSummary g;
  double nominal = 0.0;
  std::size_t errors = 0;
  for (const auto& b : d.bins) {
    g.count += b.count;
    nominal += b.nominal_sum;
    errors += b.errors;
  }
  if (g.count > 0) {
    g.mean_nominal = nominal / static_cast<double>(g.count);
    g.empirical_error = static_cast<double>(errors) / static_cast<double>(g.count);
  }
  return g;
}

}  // namespace marssl
