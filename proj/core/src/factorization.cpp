#include "semtag/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "semtag/error.hpp"

namespace semtag {

namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& M) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
  return qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), M.cols());
}

void normalize_signs(TruncatedSvd& svd) {
  for (Index j = 0; j < svd.V.cols(); ++j) {
    const double scale = svd.V.col(j).cwiseAbs().maxCoeff();
    for (Index i = 0; i < svd.V.rows(); ++i) {
      const double v = svd.V(i, j);
      if (std::abs(v) > 1e-12 * scale) {
        if (v < 0.0) {
          svd.V.col(j) *= -1.0;
          svd.U.col(j) *= -1.0;
        }
        break;
      }
    }
  }
}

TruncatedSvd leading(const Eigen::MatrixXd& U, const Eigen::VectorXd& S, const Eigen::MatrixXd& V,
                     Index k) {
  if (S.size() < k || S(0) <= 0.0 || !(S(k - 1) > 1e-12 * S(0))) {
    throw Error(ErrorCode::RankDeficient,
                "fewer than " + std::to_string(k) + " singular values above 1e-12 * S_max");
  }
  TruncatedSvd out{U.leftCols(k), S.head(k), V.leftCols(k)};
  normalize_signs(out);
  return out;
}

TruncatedSvd dense_svd(const Eigen::MatrixXd& A, Index k) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "dense SVD failed");
  return leading(svd.matrixU(), svd.singularValues(), svd.matrixV(), k);
}

// Range finder with power iterations, then an exact SVD of the small
// projected matrix. Extra passes run until the leading k values settle.
template <typename Matrix>
TruncatedSvd randomized_svd(const Matrix& A, Index k, const SvdOptions& opts) {
  const Index l = std::min<Index>(k + opts.oversampling, std::min(A.rows(), A.cols()));
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd omega(A.cols(), l);
  for (Index j = 0; j < l; ++j) {
    for (Index i = 0; i < A.cols(); ++i) omega(i, j) = normal(rng);
  }
  Eigen::MatrixXd Q = orthonormal_basis(Eigen::MatrixXd(A * omega));

  constexpr Index kMaxPasses = 50;
  Eigen::VectorXd previous;
  for (Index pass = 0; pass < kMaxPasses; ++pass) {
    if (pass >= opts.power_iterations) {
      const Eigen::MatrixXd projected = (A.transpose() * Q).transpose();
      Eigen::BDCSVD<Eigen::MatrixXd> small(projected, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (small.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "projected SVD failed");
      const Eigen::VectorXd s = small.singularValues().head(k);
      const bool settled =
          previous.size() == k &&
          ((s - previous).cwiseAbs().array() <= opts.tol * s(0)).all();
      if (settled) {
        return leading(Q * small.matrixU(), small.singularValues(), small.matrixV(), k);
      }
      previous = s;
    }
    Q = orthonormal_basis(Eigen::MatrixXd(A.transpose() * Q));
    Q = orthonormal_basis(Eigen::MatrixXd(A * Q));
  }
  throw Error(ErrorCode::NoConvergence,
              "randomized SVD did not settle within " + std::to_string(kMaxPasses) + " passes");
}

void check_rank(Index rows, Index cols, Index k) {
  if (k < 1 || k > std::min(rows, cols)) {
    throw Error(ErrorCode::InvalidRank, "k = " + std::to_string(k) + " outside [1, min(m, n)]");
  }
}

}  // namespace

TruncatedSvd truncated_svd(const Eigen::SparseMatrix<double>& A, Index k, const SvdOptions& opts) {
  check_rank(A.rows(), A.cols(), k);
  for (Index j = 0; j < A.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it) {
      if (!std::isfinite(it.value())) {
        throw Error(ErrorCode::InvalidArgument, "matrix has non-finite entries");
      }
    }
  }
  if (std::min(A.rows(), A.cols()) <= opts.dense_limit) return dense_svd(Eigen::MatrixXd(A), k);
  return randomized_svd(A, k, opts);
}

TruncatedSvd truncated_svd(const Eigen::MatrixXd& A, Index k, const SvdOptions& opts) {
  check_rank(A.rows(), A.cols(), k);
  if (!A.allFinite()) throw Error(ErrorCode::InvalidArgument, "matrix has non-finite entries");
  if (std::min(A.rows(), A.cols()) <= opts.dense_limit) return dense_svd(A, k);
  return randomized_svd(A, k, opts);
}

Eigen::MatrixXd Factorization::Y() const {
  Eigen::MatrixXd y(Y_t.rows(), Y_t.cols() + Y_f.cols());
  y << Y_t, Y_f;
  return y;
}

Eigen::MatrixXd Factorization::product() const { return X.transpose() * Y(); }

Factorization Factorization::from_blocks(Eigen::MatrixXd X, const Eigen::MatrixXd& Y, Index n_tag_cols) {
  if (X.rows() != Y.rows() || n_tag_cols < 0 || n_tag_cols > Y.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "X and Y disagree on rank or tag split");
  }
  return {std::move(X), Y.leftCols(n_tag_cols), Y.rightCols(Y.cols() - n_tag_cols)};
}

double condition_number(const Eigen::MatrixXd& M) {
  if (M.size() == 0) return 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

GaugeMatrix::GaugeMatrix(Eigen::MatrixXd M) : M_(std::move(M)) {
  if (M_.rows() != M_.cols() || M_.rows() == 0) {
    throw Error(ErrorCode::SingularGauge, "gauge must be a non-empty square matrix");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M_);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) throw Error(ErrorCode::SingularGauge, "gauge is not invertible");
  M_inv_ = lu.inverse();
  const Eigen::MatrixXd residual =
      M_ * M_inv_ - Eigen::MatrixXd::Identity(M_.rows(), M_.cols());
  if (!(residual.cwiseAbs().maxCoeff() <= 1e-8)) {
    throw Error(ErrorCode::SingularGauge, "gauge inverse is inaccurate (ill-conditioned)");
  }
}

Factorization lsi_factorize(const TruncatedSvd& svd, Index n_tag_cols) {
  const Eigen::VectorXd root = svd.S.cwiseSqrt();
  Eigen::MatrixXd X = root.asDiagonal() * svd.U.transpose();
  Eigen::MatrixXd Y = root.asDiagonal() * svd.V.transpose();
  return Factorization::from_blocks(std::move(X), Y, n_tag_cols);
}

Factorization gauge_transform(const Factorization& f, const GaugeMatrix& g) {
  if (g.matrix().rows() != f.rank()) {
    throw Error(ErrorCode::ShapeMismatch, "gauge size differs from factorization rank");
  }
  return {g.inverse().transpose() * f.X, g.matrix() * f.Y_t, g.matrix() * f.Y_f};
}

Factorization gg_lsi(const TruncatedSvd& svd, Index n_tag_cols, double max_condition) {
  if (svd.rank() != n_tag_cols) {
    throw Error(ErrorCode::KMismatch, "GG-LSI needs k = number of tags (k = " +
                                          std::to_string(svd.rank()) + ", tags = " +
                                          std::to_string(n_tag_cols) + ")");
  }
  const Factorization lsi = lsi_factorize(svd, n_tag_cols);
  const double cond = condition_number(lsi.Y_t);
  if (!(cond <= max_condition)) {
    throw Error(ErrorCode::IllConditionedTagBlock,
                "LSI tag block condition number " + std::to_string(cond));
  }
  // M = Y_t^-1, so (M^-1)' X = Y_t' X and M Y = [I, Y_t^-1 Y_f].
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(lsi.Y_t);
  Factorization out;
  out.X = lsi.Y_t.transpose() * lsi.X;
  out.Y_t = Eigen::MatrixXd::Identity(n_tag_cols, n_tag_cols);
  out.Y_f = lu.solve(lsi.Y_f);
  return out;
}

std::int64_t degrees_of_freedom(std::int64_t m, std::int64_t n, std::int64_t k) {
  if (k < 1 || k > std::min(m, n)) {
    throw Error(ErrorCode::InvalidRank, "k = " + std::to_string(k) + " outside [1, min(m, n)]");
  }
  return k * (m + n - k);
}

}  // namespace semtag
