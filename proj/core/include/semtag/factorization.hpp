#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "semtag/ternary_matrix.hpp"

namespace semtag {

/// A = U diag(S) V' restricted to the leading k singular triplets.
/// U is d_x x k, V is (d_t + d_f) x k, S is non-increasing and positive.
struct TruncatedSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd S;
  Eigen::MatrixXd V;

  Index rank() const noexcept { return S.size(); }
  Eigen::MatrixXd reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

struct SvdOptions {
  /// Reconstruction tolerance used for the randomized path's acceptance check.
  double tol = 1e-8;
  /// Dense bidiagonalization is used up to this min(rows, cols); above it a
  /// randomized range finder takes over.
  Index dense_limit = 512;
  Index oversampling = 10;
  Index power_iterations = 2;
  std::uint64_t seed = 0;
};

/// Leading k singular triplets. Columns are sign-normalized so the first
/// nonzero entry of every column of V is positive.
/// Throws InvalidRank, RankDeficient (a kept value below 1e-12 * S_max) or
/// NoConvergence.
TruncatedSvd truncated_svd(const Eigen::MatrixXd& A, Index k, const SvdOptions& opts = {});
TruncatedSvd truncated_svd(const Eigen::SparseMatrix<double>& A, Index k, const SvdOptions& opts = {});

/// Topic model A ~ X' [Y_t Y_f] with k topic rows.
struct Factorization {
  Eigen::MatrixXd X;    // k x d_x
  Eigen::MatrixXd Y_t;  // k x d_t
  Eigen::MatrixXd Y_f;  // k x d_f

  Index rank() const noexcept { return X.rows(); }
  Index rows() const noexcept { return X.cols(); }
  Index tag_cols() const noexcept { return Y_t.cols(); }
  Index feature_cols() const noexcept { return Y_f.cols(); }

  /// [Y_t Y_f] as one k x (d_t + d_f) block.
  Eigen::MatrixXd Y() const;
  /// X' Y, the d_x x (d_t + d_f) reconstruction.
  Eigen::MatrixXd product() const;

  static Factorization from_blocks(Eigen::MatrixXd X, const Eigen::MatrixXd& Y, Index n_tag_cols);
};

/// Invertible k x k re-mixing of topics.
class GaugeMatrix {
 public:
  /// Throws SingularGauge if M is not invertible to working precision.
  explicit GaugeMatrix(Eigen::MatrixXd M);

  const Eigen::MatrixXd& matrix() const noexcept { return M_; }
  const Eigen::MatrixXd& inverse() const noexcept { return M_inv_; }
  GaugeMatrix inverted() const { return GaugeMatrix(M_inv_); }

 private:
  Eigen::MatrixXd M_;
  Eigen::MatrixXd M_inv_;
};

/// X = sqrt(S) U', Y = sqrt(S) V', with Y split at n_tag_cols.
Factorization lsi_factorize(const TruncatedSvd& svd, Index n_tag_cols);

/// (X, Y) -> ((M^-1)' X, M Y); the product X'Y is unchanged.
Factorization gauge_transform(const Factorization& f, const GaugeMatrix& g);

/// LSI followed by the gauge M = (sqrt(S) V_t')^-1, which turns the tag block
/// into the identity so that topic tau is anchored on tag tau.
/// Throws KMismatch (k != n_tag_cols) or IllConditionedTagBlock (condition
/// number of the LSI tag block above max_condition).
Factorization gg_lsi(const TruncatedSvd& svd, Index n_tag_cols, double max_condition = 1e6);

/// k (m + n - k): independent parameters of an m x n rank-k matrix.
/// Throws InvalidRank unless 1 <= k <= min(m, n).
std::int64_t degrees_of_freedom(std::int64_t m, std::int64_t n, std::int64_t k);

/// 2-norm condition number via singular values; infinity when singular.
double condition_number(const Eigen::MatrixXd& M);

}  // namespace semtag
