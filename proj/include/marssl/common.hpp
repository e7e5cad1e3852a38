#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace marssl {

/// Rows are samples, columns are features.
using FeatureMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Label = int;

enum class ErrorCode {
  EmptyData,
  DegenerateData,
  DimMismatch,
  RankTooLow,
  LengthMismatch,
  InsufficientData,
  EmptyClass,
  InvalidArgument,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::RankTooLow: return "RankTooLow";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Non-fatal conditions raised during fitting (degenerate data, clamped rank,
/// empty classes). Fits record them instead of throwing.
struct Warning {
  ErrorCode code;
  std::string message;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2*pi)

/// ln(sum(exp(v))) without overflow; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double a : v) hi = std::max(hi, a);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double a : v) s += std::exp(a - hi);
  return hi + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(const Vector& v) { return log_sum_exp(std::span<const double>(v.data(), v.size())); }

/// splitmix64 step; used to derive independent sub-seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller; keeps draws identical across standard libraries.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Draws an index from unnormalized log-weights.
inline std::size_t sample_log_categorical(std::span<const double> log_w, Rng& rng) {
  const double norm = log_sum_exp(log_w);
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    const double p = std::exp(log_w[i] - norm);
    if (p > 0.0) last = i;
    acc += p;
    if (u < acc) return i;
  }
  return last;
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Copies the selected rows of `m` in the given order.
inline FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> idx) {
  FeatureMatrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline FeatureMatrix vstack(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  require(a.cols() == b.cols(), ErrorCode::DimMismatch, "vstack column counts differ");
  FeatureMatrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace marssl
