#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semtag/factorization.hpp"
#include "semtag/ternary_matrix.hpp"

namespace semtag {

struct GlrmConfig {
  Index k = 1;
  double lambda = 0.01;
  /// 0 fits on every observed entry; otherwise N = ceil(C k (m + n - k)).
  double subsample_c = 2.0;
  std::uint64_t seed = 0;
  double noise_low = 0.0;
  double noise_high = 1e-3;
  double impute_fill = 0.5;
  std::int64_t max_sweeps = 10000;
  double rel_tol = 1e-6;
  bool anchor = true;
  bool nonneg_y = false;
  /// Experimental; known to be numerically unstable.
  bool nonneg_x = false;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Coordinates drawn from the observed set; duplicates are meaningful.
struct SampleMultiset {
  std::vector<Coord> coords;
  Index source_size = 0;

  Index size() const noexcept { return static_cast<Index>(coords.size()); }
};

/// log(1 + exp(-(2a - 1) u)), evaluated without overflow.
double logistic_loss(double u, int a);

/// d/du of logistic_loss.
double grad_entry(double u, int a);

/// ceil(C k (m + n - k)). Throws InvalidRank, InvalidArgument for C <= 0.
std::int64_t sample_count(std::int64_t m, std::int64_t n, std::int64_t k, double C);

/// N i.i.d. uniform draws, with replacement. Throws EmptyObservedSet.
SampleMultiset draw_subsample(const ObservedSet& omega, Index N, std::uint64_t seed);

/// Every observed coordinate exactly once, row-major.
SampleMultiset all_samples(const ObservedSet& omega);

/// Elementwise soft threshold.
Eigen::VectorXd prox_l1(const Eigen::VectorXd& z, double threshold);

/// Euclidean projection onto {x : ||x||_1 <= radius}.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius = 1.0);

/// Pins y[anchor_idx] = 1 and projects the other entries of the first
/// tag_block entries onto the unit L1 ball; the rest of y is untouched.
/// tag_block < 0 means the whole vector is the tag block.
/// Throws AnchorOutOfTagBlock.
Eigen::VectorXd prox_anchor(const Eigen::VectorXd& y, Index anchor_idx, Index tag_block = -1);

/// Data term plus lambda (|X|_1 + |Y|_1); pinned anchor entries are not
/// regularized when cfg.anchor is set. Throws ShapeMismatch, and
/// InvalidArgument if a sample lands on a Missing cell.
double total_loss(const Factorization& f, const TernaryMatrix& A, const SampleMultiset& samples,
                  const GlrmConfig& cfg);

struct LossGradient {
  Eigen::MatrixXd X;  // k x d_x
  Eigen::MatrixXd Y;  // k x (d_t + d_f)
};

/// Gradient of the sampled data term (no regularizer) with respect to X and Y.
LossGradient sampled_gradient(const Factorization& f, const TernaryMatrix& A,
                              const SampleMultiset& samples);

struct SweepState {
  std::int64_t sweep = 0;
  double loss = 0.0;
  const Factorization* factors = nullptr;
};

struct FitOptions {
  /// Called with the initial iterate (sweep 0) and after every sweep.
  std::function<void(const SweepState&)> on_sweep;
  /// Replaces the subsample draw; mostly for experiments and tests.
  std::optional<SampleMultiset> samples;
};

struct FitResult {
  Factorization factors;
  /// Objective after each sweep; entry 0 is the starting point.
  std::vector<double> loss_trace;
  Index n_samples = 0;
  std::int64_t sweeps = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  std::string rng = "mt19937_64";

  double final_loss() const { return loss_trace.empty() ? 0.0 : loss_trace.back(); }
};

/// Warm start used by fit when none is given: impute, truncated SVD, then the
/// tag-anchored gauge (GG-LSI) when k equals the tag count, else plain LSI;
/// uniform noise in [noise_low, noise_high] is added to X.
Factorization warm_start(const TernaryMatrix& A, const GlrmConfig& cfg);

/// Alternating proximal gradient on X then Y, with backtracking from step 1
/// and a descent check, until the relative objective change drops below
/// rel_tol or max_sweeps is hit. A caller-provided warm start is used as is.
/// Throws InvalidConfig, EmptyObservedSet, Diverged, or SVD errors.
FitResult fit(const TernaryMatrix& A, const GlrmConfig& cfg,
              const std::optional<Factorization>& warm = std::nullopt, const FitOptions& opts = {});

}  // namespace semtag
