#pragma once

#include "marssl/common.hpp"

namespace marssl {

/// Affine projection onto the leading principal directions.
struct PcaMap {
  Vector mean;                // d
  Matrix basis;               // d x r, orthonormal columns
  Vector explained_variance;  // r, nonincreasing

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return basis.cols(); }
};

struct PcaFit {
  PcaMap map;
  std::vector<Warning> warnings;
};

/// Fits PCA with sample-covariance (N-1) variances. Uses the d x d covariance,
/// or the N x N Gram matrix when there are fewer rows than columns. A target
/// dimension above the numerical rank is clamped with a RankTooLow warning.
inline PcaFit fit_pca_checked(const FeatureMatrix& data, Eigen::Index r) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  require(n >= 2 && d >= 1, ErrorCode::EmptyData, "fit_pca needs at least 2 rows");
  require(data.allFinite(), ErrorCode::InvalidArgument, "data contains non-finite entries");
  require(r >= 1 && r <= std::min(n - 1, d), ErrorCode::InvalidArgument,
          "target dimension must satisfy 1 <= r <= min(N-1, d)");

  PcaFit out;
  const Vector mean = data.colwise().mean().transpose();
  const FeatureMatrix centered = data.rowwise() - mean.transpose();
  const double denom = static_cast<double>(n - 1);

  Vector eigvals;  // descending
  Matrix eigvecs;  // d x m, descending order
  if (n >= d) {
    Eigen::SelfAdjointEigenSolver<Matrix> es((centered.transpose() * centered) / denom);
    require(es.info() == Eigen::Success, ErrorCode::InvalidArgument, "eigendecomposition failed");
    eigvals = es.eigenvalues().reverse();
    eigvecs = es.eigenvectors().rowwise().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es((centered * centered.transpose()) / denom);
    require(es.info() == Eigen::Success, ErrorCode::InvalidArgument, "eigendecomposition failed");
    eigvals = es.eigenvalues().reverse();
    const Matrix u = es.eigenvectors().rowwise().reverse();
    eigvecs = Matrix::Zero(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (eigvals[j] <= 0.0) continue;
      eigvecs.col(j) = centered.transpose() * u.col(j);
      eigvecs.col(j).normalize();
    }
  }
  eigvals = eigvals.cwiseMax(0.0);

  const double tol = std::max(eigvals[0], 1e-300) * 1e-12 * static_cast<double>(std::max(n, d));
  Eigen::Index rank = 0;
  while (rank < eigvals.size() && eigvals[rank] > tol) ++rank;
  if (r > rank) {
    out.warnings.push_back({ErrorCode::RankTooLow,
                            "requested " + std::to_string(r) + " components but data rank is " + std::to_string(rank)});
    r = std::max<Eigen::Index>(rank, 1);
  }

  Matrix basis = eigvecs.leftCols(r);
  if (n < d) {
    // Re-orthonormalize: Gram-route vectors lose orthogonality for tiny eigenvalues.
    Eigen::HouseholderQR<Matrix> qr(basis);
    Matrix q = qr.householderQ() * Matrix::Identity(d, r);
    for (Eigen::Index j = 0; j < r; ++j)
      if (q.col(j).dot(basis.col(j)) < 0.0) q.col(j) = -q.col(j);
    basis = q;
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < 0.0) basis.col(j) = -basis.col(j);
  }
  out.map = PcaMap{mean, basis, eigvals.head(r)};
  return out;
}

inline PcaMap fit_pca(const FeatureMatrix& data, Eigen::Index r) { return fit_pca_checked(data, r).map; }

inline FeatureMatrix transform(const PcaMap& map, const FeatureMatrix& data) {
  require(data.cols() == map.input_dim(), ErrorCode::DimMismatch,
          "expected " + std::to_string(map.input_dim()) + " columns, got " + std::to_string(data.cols()));
  return (data.rowwise() - map.mean.transpose()) * map.basis;
}

/// Maps reduced coordinates back to the input space (exact when r = d).
inline FeatureMatrix inverse_transform(const PcaMap& map, const FeatureMatrix& reduced) {
  require(reduced.cols() == map.output_dim(), ErrorCode::DimMismatch, "reduced dimension mismatch");
  return (reduced * map.basis.transpose()).rowwise() + map.mean.transpose();
}

}  // namespace marssl
