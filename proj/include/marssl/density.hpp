#pragma once

// Gaussian mixture densities and their variational Bayes fit.
//
// The VB procedure is the conjugate Gaussian-Wishart / Dirichlet scheme:
// responsibilities and posterior hyperparameters are updated in turn, which
// never decreases the evidence lower bound. The returned GmmDensity is the
// plug-in density built from posterior means.

#include "marssl/common.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>

namespace marssl {

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
};

/// Immutable Gaussian mixture. Cholesky factors are computed once at
/// construction; evaluation is const and safe from any number of threads.
class GmmDensity {
 public:
  GmmDensity() = default;

  explicit GmmDensity(std::vector<GaussianComponent> components) : components_(std::move(components)) {
    require(!components_.empty(), ErrorCode::InvalidArgument, "mixture needs at least one component");
    dim_ = components_.front().mean.size();
    require(dim_ > 0, ErrorCode::InvalidArgument, "mixture dimension must be positive");
    double total = 0.0;
    for (const auto& c : components_) {
      require(c.mean.size() == dim_ && c.covariance.rows() == dim_ && c.covariance.cols() == dim_,
              ErrorCode::DimMismatch, "component shapes disagree");
      require(c.weight >= 0.0 && std::isfinite(c.weight), ErrorCode::InvalidArgument, "negative mixture weight");
      require(c.mean.allFinite() && c.covariance.allFinite(), ErrorCode::InvalidArgument, "non-finite component");
      require((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() <=
                  1e-12 * std::max(1.0, c.covariance.cwiseAbs().maxCoeff()),
              ErrorCode::InvalidArgument, "covariance is not symmetric");
      total += c.weight;
    }
    require(std::abs(total - 1.0) <= 1e-9, ErrorCode::InvalidArgument, "mixture weights must sum to 1");

    chol_.reserve(components_.size());
    log_norm_.reserve(components_.size());
    for (const auto& c : components_) {
      Eigen::LLT<Matrix> llt(c.covariance);
      require(llt.info() == Eigen::Success, ErrorCode::InvalidArgument, "covariance is not positive definite");
      Matrix L = llt.matrixL();
      const double log_det = 2.0 * L.diagonal().array().log().sum();
      chol_.push_back(std::move(L));
      log_norm_.push_back((c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity()) -
                          0.5 * (static_cast<double>(dim_) * kLog2Pi + log_det));
    }
  }

  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return components_.size(); }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  const GaussianComponent& component(std::size_t k) const { return components_.at(k); }
  const Matrix& cholesky(std::size_t k) const { return chol_.at(k); }

  /// ln sum_k w_k N(x; mu_k, Sigma_k).
  double log_density(const Eigen::Ref<const Vector>& x) const {
    require(x.size() == dim_, ErrorCode::DimMismatch,
            "expected dimension " + std::to_string(dim_) + ", got " + std::to_string(x.size()));
    std::vector<double> terms(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) terms[k] = log_norm_[k] - 0.5 * mahalanobis_sq(k, x);
    return log_sum_exp(std::span<const double>(terms));
  }

  /// ln N(x; mu_k, Sigma_k), without the mixture weight.
  double component_log_density(std::size_t k, const Eigen::Ref<const Vector>& x) const {
    require(x.size() == dim_, ErrorCode::DimMismatch, "dimension mismatch");
    const double log_w = components_[k].weight > 0.0 ? std::log(components_[k].weight) : 0.0;
    return log_norm_[k] - log_w - 0.5 * mahalanobis_sq(k, x);
  }

  Vector log_density_rows(const FeatureMatrix& data) const {
    Vector out(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) out[i] = log_density(data.row(i).transpose());
    return out;
  }

 private:
  double mahalanobis_sq(std::size_t k, const Eigen::Ref<const Vector>& x) const {
    const Vector diff = x - components_[k].mean;
    return chol_[k].triangularView<Eigen::Lower>().solve(diff).squaredNorm();
  }

  std::vector<GaussianComponent> components_;
  std::vector<Matrix> chol_;
  std::vector<double> log_norm_;
  Eigen::Index dim_ = 0;
};

inline double log_density(const GmmDensity& model, const Eigen::Ref<const Vector>& x) { return model.log_density(x); }

struct VbConfig {
  int max_components = 10;
  double dirichlet_concentration = 0.1;  // 1 / max_components
  double prior_mean_scale = 1.0;
  double wishart_dof_offset = 0.0;
  int max_iters = 200;
  double elbo_tol = 1e-5;
  double reg_floor = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    require(max_components >= 1, ErrorCode::InvalidArgument, "max_components must be >= 1");
    require(dirichlet_concentration > 0.0, ErrorCode::InvalidArgument, "dirichlet_concentration must be > 0");
    require(prior_mean_scale > 0.0, ErrorCode::InvalidArgument, "prior_mean_scale must be > 0");
    require(wishart_dof_offset >= 0.0, ErrorCode::InvalidArgument, "wishart_dof_offset must be >= 0");
    require(max_iters >= 1, ErrorCode::InvalidArgument, "max_iters must be >= 1");
    require(elbo_tol > 0.0, ErrorCode::InvalidArgument, "elbo_tol must be > 0");
    require(reg_floor > 0.0, ErrorCode::InvalidArgument, "reg_floor must be > 0");
  }
};

/// Symmetrizes and clamps eigenvalues from below.
inline Matrix clamp_covariance(const Matrix& cov, double floor) {
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() >= floor) return sym;
  const Vector ev = es.eigenvalues().cwiseMax(floor);
  Matrix out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  out = 0.5 * (out + out.transpose());
  // Rounding in the reconstruction can leave the smallest eigenvalue a hair below the floor.
  Eigen::SelfAdjointEigenSolver<Matrix> check(out);
  const double lo = check.eigenvalues().minCoeff();
  if (lo < floor) out.diagonal().array() += (floor - lo);
  return out;
}

inline GmmDensity fit_gaussian(const FeatureMatrix& data, double reg_floor) {
  require(data.rows() >= 1 && data.cols() >= 1, ErrorCode::EmptyData, "fit_gaussian needs at least one row");
  require(data.allFinite(), ErrorCode::InvalidArgument, "data contains non-finite entries");
  require(reg_floor > 0.0, ErrorCode::InvalidArgument, "reg_floor must be > 0");
  const Vector mean = data.colwise().mean().transpose();
  const FeatureMatrix centered = data.rowwise() - mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(data.rows());
  return GmmDensity({{1.0, mean, clamp_covariance(cov, reg_floor)}});
}

/// Draws n rows; component by weight, then mean + L z.
inline FeatureMatrix sample(const GmmDensity& model, Eigen::Index n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::InvalidArgument, "sample count must be >= 1");
  Rng rng(seed);
  const auto d = model.dim();
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : model.components()) cumulative.push_back(acc += c.weight);
  FeatureMatrix out(n, d);
  Vector z(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = uniform01(rng) * acc;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    k = std::min(k, model.size() - 1);
    while (model.component(k).weight == 0.0 && k > 0) --k;
    for (Eigen::Index j = 0; j < d; ++j) z[j] = standard_normal(rng);
    out.row(i) = (model.component(k).mean + model.cholesky(k) * z).transpose();
  }
  return out;
}

struct VbResult {
  GmmDensity density;
  std::vector<double> elbo_trace;  // one entry per completed iteration
  int iterations = 0;
  bool converged = false;
  std::vector<Warning> warnings;
};

namespace detail {

inline double digamma(double x) { return boost::math::digamma(x); }

/// ln B(W, nu) of the Wishart normalizer, given ln|W|.
inline double log_wishart_norm(double log_det_w, double nu, int d) {
  double s = -0.5 * nu * log_det_w - 0.5 * nu * d * std::numbers::ln2 -
             0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int i = 1; i <= d; ++i) s -= std::lgamma(0.5 * (nu + 1 - i));
  return s;
}

inline bool lex_less(const FeatureMatrix& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) < m(b, j)) return true;
    if (m(b, j) < m(a, j)) return false;
  }
  return false;
}

/// Rows in lexicographic order, so everything downstream is independent of input order.
inline FeatureMatrix canonical_order(const FeatureMatrix& data) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(data.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return lex_less(data, static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  });
  return select_rows(data, idx);
}

/// k-means++ seeding followed by a few Lloyd steps; returns hard labels.
inline std::vector<int> kmeans_init(const FeatureMatrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  std::vector<Vector> centers;
  centers.push_back(x.row(static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n))).transpose());
  Vector dist2(n);
  for (Eigen::Index i = 0; i < n; ++i) dist2[i] = (x.row(i).transpose() - centers[0]).squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = dist2.sum();
    if (!(total > 0.0)) break;  // fewer distinct points than k
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += dist2[i];
      if (u < acc && dist2[i] > 0.0) { pick = i; break; }
    }
    centers.push_back(x.row(pick).transpose());
    for (Eigen::Index i = 0; i < n; ++i) dist2[i] = std::min(dist2[i], (x.row(i).transpose() - centers.back()).squaredNorm());
  }

  const int kc = static_cast<int>(centers.size());
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int step = 0; step < 10; ++step) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < kc; ++c) {
        const double dd = (x.row(i).transpose() - centers[static_cast<std::size_t>(c)]).squaredNorm();
        if (dd < best_d) { best_d = dd; best = c; }
      }
      if (assign[static_cast<std::size_t>(i)] != best) changed = true;
      assign[static_cast<std::size_t>(i)] = best;
    }
    if (!changed && step > 0) break;
    std::vector<Vector> sums(static_cast<std::size_t>(kc), Vector::Zero(x.cols()));
    std::vector<int> counts(static_cast<std::size_t>(kc), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] += x.row(i).transpose();
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < kc; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers[static_cast<std::size_t>(c)] = sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
  }
  return assign;
}

/// Coordinate-ascent state of the conjugate VB mixture (Gaussian-Wishart
/// components, Dirichlet weights). Copyable so trial moves can be evaluated
/// on a copy and kept only when they raise the bound.
class VbEngine {
 public:
  VbEngine(const FeatureMatrix& x, const VbConfig& cfg, const Matrix& data_cov, const Vector& data_mean, int k_count)
      : x_(&x),
        d_(static_cast<int>(x.cols())),
        k_(k_count),
        alpha0_(cfg.dirichlet_concentration),
        beta0_(cfg.prior_mean_scale),
        nu0_(static_cast<double>(x.cols()) + cfg.wishart_dof_offset),
        m0_(data_mean),
        w0_inv_(data_cov) {
    Eigen::LLT<Matrix> llt(w0_inv_);
    log_det_w0_ = -2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    resp_ = Matrix::Zero(x.rows(), k_);
    m_.resize(static_cast<std::size_t>(k_));
    w_inv_.resize(static_cast<std::size_t>(k_));
    w_.resize(static_cast<std::size_t>(k_));
  }

  Matrix& responsibilities() { return resp_; }
  const Vector& counts() const { return nk_; }
  int components() const { return k_; }

  void m_step() {
    const FeatureMatrix& x = *x_;
    nk_ = resp_.colwise().sum().transpose();
    alpha_ = Vector::Constant(k_, alpha0_) + nk_;
    beta_ = Vector::Constant(k_, beta0_) + nk_;
    nu_ = Vector::Constant(k_, nu0_) + nk_;
    log_det_w_.resize(k_);
    e_log_pi_.resize(k_);
    e_log_lambda_.resize(k_);
    const double dg_sum = digamma(alpha_.sum());
    for (int k = 0; k < k_; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const double nkk = nk_[k];
      const Vector xbar = nkk > 0.0 ? Vector((x.transpose() * resp_.col(k)) / nkk) : m0_;
      const FeatureMatrix dev = x.rowwise() - xbar.transpose();
      const Matrix scatter = dev.transpose() * resp_.col(k).asDiagonal() * dev;  // N_k S_k
      const Vector shift = xbar - m0_;
      m_[ks] = (beta0_ * m0_ + nkk * xbar) / beta_[k];
      Matrix wi = w0_inv_ + scatter + (beta0_ * nkk / (beta0_ + nkk)) * shift * shift.transpose();
      wi = 0.5 * (wi + wi.transpose());
      Eigen::LLT<Matrix> llt(wi);
      w_inv_[ks] = wi;
      w_[ks] = llt.solve(Matrix::Identity(d_, d_));
      log_det_w_[k] = -2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      e_log_pi_[k] = digamma(alpha_[k]) - dg_sum;
      double s = d_ * std::numbers::ln2 + log_det_w_[k];
      for (int i = 1; i <= d_; ++i) s += digamma(0.5 * (nu_[k] + 1 - i));
      e_log_lambda_[k] = s;
    }
  }

  void e_step() {
    expected_quad();
    const Eigen::Index n = resp_.rows();
    Vector lr(k_);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < k_; ++k)
        lr[k] = e_log_pi_[k] + 0.5 * e_log_lambda_[k] - 0.5 * d_ * kLog2Pi - 0.5 * quad_(i, k);
      const double lse = log_sum_exp(lr);
      resp_.row(i) = (lr.array() - lse).exp().transpose();
    }
  }

  /// Evidence lower bound for the current responsibilities and hyperparameters.
  double elbo() {
    expected_quad();
    const int d = d_;
    const double lnC_alpha0 = std::lgamma(k_ * alpha0_) - k_ * std::lgamma(alpha0_);
    double ln_c_alpha = std::lgamma(alpha_.sum());
    for (int k = 0; k < k_; ++k) ln_c_alpha -= std::lgamma(alpha_[k]);
    const double ln_b0 = log_wishart_norm(log_det_w0_, nu0_, d);

    double e_log_px = 0.0, e_log_pz = 0.0, e_log_qz = 0.0;
    for (int k = 0; k < k_; ++k) {
      // quad_ already holds d/beta + nu (x-m)^T W (x-m).
      e_log_px += 0.5 * (nk_[k] * (e_log_lambda_[k] - d * kLog2Pi) - resp_.col(k).dot(quad_.col(k)));
      e_log_pz += nk_[k] * e_log_pi_[k];
    }
    for (Eigen::Index i = 0; i < resp_.size(); ++i) {
      const double r = resp_.data()[i];
      if (r > 0.0) e_log_qz += r * std::log(r);
    }
    const double e_log_ppi = lnC_alpha0 + (alpha0_ - 1.0) * e_log_pi_.sum();
    double e_log_qpi = ln_c_alpha;
    for (int k = 0; k < k_; ++k) e_log_qpi += (alpha_[k] - 1.0) * e_log_pi_[k];

    double e_log_pmu = k_ * ln_b0;
    double e_log_qmu = 0.0;
    for (int k = 0; k < k_; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Vector dm = m_[ks] - m0_;
      e_log_pmu += 0.5 * (d * std::log(beta0_ / (2.0 * std::numbers::pi)) + e_log_lambda_[k] - d * beta0_ / beta_[k] -
                          beta0_ * nu_[k] * dm.dot(w_[ks] * dm));
      e_log_pmu += 0.5 * (nu0_ - d - 1.0) * e_log_lambda_[k];
      e_log_pmu -= 0.5 * nu_[k] * (w0_inv_.cwiseProduct(w_[ks])).sum();
      const double entropy =
          -log_wishart_norm(log_det_w_[k], nu_[k], d) - 0.5 * (nu_[k] - d - 1.0) * e_log_lambda_[k] + 0.5 * nu_[k] * d;
      e_log_qmu += 0.5 * e_log_lambda_[k] + 0.5 * d * std::log(beta_[k] / (2.0 * std::numbers::pi)) - 0.5 * d - entropy;
    }
    return e_log_px + e_log_pz + e_log_ppi + e_log_pmu - e_log_qz - e_log_qpi - e_log_qmu;
  }

  /// Plug-in component from posterior means.
  GaussianComponent component(int k, double reg_floor) const {
    const auto ks = static_cast<std::size_t>(k);
    return {alpha_[k] / alpha_.sum(), m_[ks], clamp_covariance(w_inv_[ks] / nu_[k], reg_floor)};
  }

 private:
  void expected_quad() {
    const FeatureMatrix& x = *x_;
    quad_.resize(x.rows(), k_);
    for (int k = 0; k < k_; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Matrix u = Eigen::LLT<Matrix>(w_[ks]).matrixU();
      const Matrix proj = (x.rowwise() - m_[ks].transpose()) * u.transpose();
      quad_.col(k) = d_ / beta_[k] + nu_[k] * proj.rowwise().squaredNorm().array();
    }
  }

  const FeatureMatrix* x_;
  int d_;
  int k_;
  double alpha0_, beta0_, nu0_;
  Vector m0_;
  Matrix w0_inv_;
  double log_det_w0_ = 0.0;

  Matrix resp_;
  Matrix quad_;
  Vector nk_, alpha_, beta_, nu_;
  std::vector<Vector> m_;
  std::vector<Matrix> w_inv_;  // W_k^{-1}
  std::vector<Matrix> w_;      // W_k
  Vector log_det_w_;
  Vector e_log_pi_;      // E[ln pi_k]
  Vector e_log_lambda_;  // E[ln |Lambda_k|]
};

/// E/M sweeps until the per-sample change of the bound drops below tol.
inline double run_vb(VbEngine& engine, int max_iters, double tol, double n, std::vector<double>* trace, int* iters) {
  double prev = -std::numeric_limits<double>::infinity();
  double cur = prev;
  for (int it = 0; it < max_iters; ++it) {
    engine.e_step();
    engine.m_step();
    cur = engine.elbo();
    if (trace) trace->push_back(cur);
    if (iters) ++*iters;
    if (std::abs(cur - prev) / n < tol) break;
    prev = cur;
  }
  return cur;
}

}  // namespace detail

/// Variational Bayes GMM fit with the full ELBO trace.
///
/// After the main coordinate-ascent loop, components are tentatively emptied
/// (smallest first) and the fit re-converged on a copy; a move is kept only if
/// it raises the bound, so the recorded trace stays non-decreasing. Plain
/// coordinate ascent merges redundant components very slowly.
inline VbResult fit_vb_gmm_traced(const FeatureMatrix& input, const VbConfig& cfg) {
  cfg.validate();
  require(input.rows() >= 2, ErrorCode::EmptyData, "fit_vb_gmm needs at least 2 rows");
  require(input.cols() >= 1, ErrorCode::EmptyData, "fit_vb_gmm needs at least 1 column");
  require(input.allFinite(), ErrorCode::InvalidArgument, "data contains non-finite entries");

  VbResult result;
  const FeatureMatrix x = detail::canonical_order(input);
  const Eigen::Index n = x.rows();
  const int d = static_cast<int>(x.cols());
  const double nd = static_cast<double>(n);

  const Vector data_mean = x.colwise().mean().transpose();
  if ((x.rowwise() - data_mean.transpose()).cwiseAbs().maxCoeff() == 0.0) {
    result.warnings.push_back({ErrorCode::DegenerateData, "all rows identical; returning a single reg_floor component"});
    result.density = GmmDensity({{1.0, data_mean, Matrix::Identity(d, d) * cfg.reg_floor}});
    result.converged = true;
    return result;
  }

  const FeatureMatrix centered = x.rowwise() - data_mean.transpose();
  const Matrix data_cov = clamp_covariance(centered.transpose() * centered / nd, cfg.reg_floor);

  Rng rng(mix_seed(cfg.seed, 0));
  const std::vector<int> init = detail::kmeans_init(x, std::min<int>(cfg.max_components, static_cast<int>(n)), rng);
  const int k_count = 1 + *std::max_element(init.begin(), init.end());

  detail::VbEngine engine(x, cfg, data_cov, data_mean, k_count);
  for (Eigen::Index i = 0; i < n; ++i) engine.responsibilities()(i, init[static_cast<std::size_t>(i)]) = 1.0;
  engine.m_step();
  double bound = detail::run_vb(engine, cfg.max_iters, cfg.elbo_tol, nd, &result.elbo_trace, &result.iterations);
  result.converged = result.iterations < cfg.max_iters;

  constexpr double kEmpty = 0.1;  // expected count below which a component is empty
  constexpr int kTrialIters = 60;
  constexpr int kTrialsPerSweep = 3;
  for (bool accepted = true; accepted;) {
    accepted = false;
    std::vector<int> live;
    for (int k = 0; k < k_count; ++k)
      if (engine.counts()[k] >= kEmpty) live.push_back(k);
    if (live.size() < 2) break;
    std::stable_sort(live.begin(), live.end(), [&](int a, int b) { return engine.counts()[a] < engine.counts()[b]; });
    for (int t = 0; t < kTrialsPerSweep && t < static_cast<int>(live.size()); ++t) {
      detail::VbEngine trial = engine;
      Matrix& r = trial.responsibilities();
      r.col(live[static_cast<std::size_t>(t)]).setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = r.row(i).sum();
        if (s > 0.0) r.row(i) /= s;
      }
      trial.m_step();
      const double trial_bound = detail::run_vb(trial, kTrialIters, cfg.elbo_tol, nd, nullptr, nullptr);
      if (trial_bound > bound) {
        engine = std::move(trial);
        bound = trial_bound;
        result.elbo_trace.push_back(bound);
        accepted = true;
        break;
      }
    }
  }

  // Plug-in density from posterior means; drop components with
  // expected weight N_k / N below 1 / (10 N).
  std::vector<GaussianComponent> comps;
  double kept = 0.0;
  for (int k = 0; k < k_count; ++k) {
    if (engine.counts()[k] / nd < 1.0 / (10.0 * nd)) continue;
    comps.push_back(engine.component(k, cfg.reg_floor));
    kept += comps.back().weight;
  }
  if (comps.empty()) {
    int best = 0;
    for (int k = 1; k < k_count; ++k)
      if (engine.counts()[k] > engine.counts()[best]) best = k;
    comps.push_back(engine.component(best, cfg.reg_floor));
    kept = comps.back().weight;
  }
  for (auto& c : comps) c.weight /= kept;
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < comps.size(); ++k) s += comps[k].weight;
  if (comps.size() > 1) comps.back().weight = std::max(0.0, 1.0 - s);
  result.density = GmmDensity(std::move(comps));
  return result;
}

inline GmmDensity fit_vb_gmm(const FeatureMatrix& data, const VbConfig& cfg) { return fit_vb_gmm_traced(data, cfg).density; }

}  // namespace marssl
