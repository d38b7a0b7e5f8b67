#include "semtag/glrm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>

#include "semtag/error.hpp"

namespace semtag {

void GlrmConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (k < 1) bad("rank must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda must be finite and >= 0");
  if (!(subsample_c >= 0.0) || !std::isfinite(subsample_c)) bad("subsample C must be finite and >= 0");
  if (!(noise_low <= noise_high)) bad("noise_low must not exceed noise_high");
  if (!(impute_fill >= 0.0 && impute_fill <= 1.0)) bad("impute fill must lie in [0, 1]");
  if (max_sweeps < 0) bad("max_sweeps must be >= 0");
  if (!(rel_tol >= 0.0)) bad("rel_tol must be >= 0");
}

double logistic_loss(double u, int a) {
  const double z = a ? -u : u;
  // log(1 + e^z) = max(z, 0) + log1p(e^-|z|)
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double grad_entry(double u, int a) {
  const double s = a ? 1.0 : -1.0;
  const double su = s * u;
  if (su > 0.0) {
    const double e = std::exp(-su);
    return -s * e / (1.0 + e);
  }
  return -s / (1.0 + std::exp(su));
}

std::int64_t sample_count(std::int64_t m, std::int64_t n, std::int64_t k, double C) {
  const std::int64_t dof = degrees_of_freedom(m, n, k);
  if (!(C > 0.0) || !std::isfinite(C)) throw Error(ErrorCode::InvalidArgument, "C must be positive");
  const long double exact = static_cast<long double>(C) * static_cast<long double>(dof);
  // Values like 0.1 * 30 land a hair above an integer in binary; snap them.
  const long double nearest = std::round(exact);
  if (std::abs(exact - nearest) <= 1e-9L * std::max(1.0L, exact)) {
    return static_cast<std::int64_t>(nearest);
  }
  return static_cast<std::int64_t>(std::ceil(exact));
}

SampleMultiset draw_subsample(const ObservedSet& omega, Index N, std::uint64_t seed) {
  if (omega.empty()) throw Error(ErrorCode::EmptyObservedSet, "no observed entries to sample from");
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, omega.size() - 1);
  SampleMultiset s;
  s.source_size = omega.size();
  s.coords.reserve(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) s.coords.push_back(omega.at(pick(rng)));
  return s;
}

SampleMultiset all_samples(const ObservedSet& omega) {
  if (omega.empty()) throw Error(ErrorCode::EmptyObservedSet, "no observed entries");
  SampleMultiset s;
  s.source_size = omega.size();
  s.coords = omega.materialize();
  return s;
}

Eigen::VectorXd prox_l1(const Eigen::VectorXd& z, double threshold) {
  Eigen::VectorXd out(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const double mag = std::abs(z(i)) - threshold;
    out(i) = mag > 0.0 ? std::copysign(mag, z(i)) : 0.0;
  }
  return out;
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
  if (v.cwiseAbs().sum() <= radius) return v;
  // Sort magnitudes descending and find the soft-threshold level theta.
  std::vector<double> mag(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) mag[static_cast<std::size_t>(i)] = std::abs(v(i));
  std::sort(mag.begin(), mag.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mag.size(); ++j) {
    cumsum += mag[j];
    const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
    if (mag[j] > candidate) theta = candidate;
  }
  return prox_l1(v, theta);
}

Eigen::VectorXd prox_anchor(const Eigen::VectorXd& y, Index anchor_idx, Index tag_block) {
  if (tag_block < 0) tag_block = y.size();
  if (tag_block > y.size() || anchor_idx < 0 || anchor_idx >= tag_block) {
    throw Error(ErrorCode::AnchorOutOfTagBlock,
                "anchor " + std::to_string(anchor_idx) + " outside tag block of size " +
                    std::to_string(tag_block));
  }
  Eigen::VectorXd out = y;
  Eigen::VectorXd off(tag_block - 1);
  for (Index j = 0, o = 0; j < tag_block; ++j) {
    if (j != anchor_idx) off(o++) = y(j);
  }
  off = project_l1_ball(off, 1.0);
  for (Index j = 0, o = 0; j < tag_block; ++j) {
    out(j) = j == anchor_idx ? 1.0 : off(o++);
  }
  return out;
}

namespace {

/// Samples with their labels resolved once; the optimizer touches only these.
struct SampledProblem {
  std::vector<Index> rows;
  std::vector<Index> cols;
  std::vector<int> labels;
};

SampledProblem resolve(const TernaryMatrix& A, const SampleMultiset& samples) {
  SampledProblem p;
  p.rows.reserve(samples.coords.size());
  p.cols.reserve(samples.coords.size());
  p.labels.reserve(samples.coords.size());
  for (const auto& c : samples.coords) {
    const auto v = A.at(c.row, c.col);
    if (v == TernaryValue::Missing) {
      throw Error(ErrorCode::InvalidArgument, "sample (" + std::to_string(c.row) + ", " +
                                                  std::to_string(c.col) +
                                                  ") is not an observed entry");
    }
    p.rows.push_back(c.row);
    p.cols.push_back(c.col);
    p.labels.push_back(v == TernaryValue::One ? 1 : 0);
  }
  return p;
}

void check_shapes(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const TernaryMatrix& A) {
  if (X.rows() != Y.rows() || X.cols() != A.rows() || Y.cols() != A.cols()) {
    throw Error(ErrorCode::ShapeMismatch,
                "factorization is " + std::to_string(X.cols()) + "x" + std::to_string(Y.cols()) +
                    " (rank " + std::to_string(X.rows()) + "), matrix is " +
                    std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
  }
}

double data_loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SampledProblem& p) {
  double total = 0.0;
  for (std::size_t s = 0; s < p.rows.size(); ++s) {
    total += logistic_loss(X.col(p.rows[s]).dot(Y.col(p.cols[s])), p.labels[s]);
  }
  return total;
}

/// Which entries of Y are pinned anchors (excluded from the L1 term).
bool is_anchor(bool anchor, Index topic, Index col, Index n_tags) {
  return anchor && col < n_tags && col == topic;
}

double regularizer(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double lambda, bool anchor,
                   Index n_tags) {
  if (lambda == 0.0) return 0.0;
  double y_sum = 0.0;
  for (Index j = 0; j < Y.cols(); ++j) {
    for (Index t = 0; t < Y.rows(); ++t) {
      if (!is_anchor(anchor, t, j, n_tags)) y_sum += std::abs(Y(t, j));
    }
  }
  return lambda * (X.cwiseAbs().sum() + y_sum);
}

class Optimizer {
 public:
  Optimizer(const SampledProblem& problem, const GlrmConfig& cfg, Index n_tags)
      : p_(problem), cfg_(cfg), n_tags_(n_tags) {}

  double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) const {
    return data_loss(X, Y, p_) + regularizer(X, Y, cfg_.lambda, cfg_.anchor, n_tags_);
  }

  void project_y(Eigen::MatrixXd& Y) const {
    if (cfg_.nonneg_y) Y = Y.cwiseMax(0.0);
    if (!cfg_.anchor) return;
    for (Index t = 0; t < Y.rows(); ++t) {
      const Eigen::VectorXd tags = Y.row(t).head(n_tags_).transpose();
      Y.row(t).head(n_tags_) = prox_anchor(tags, t, n_tags_).transpose();
    }
  }

  /// One backtracking proximal-gradient step on X (block = 0) or Y (block = 1).
  /// Returns the new objective; leaves the iterate unchanged when no step
  /// size down to 1e-12 gives a decrease.
  double step(Eigen::MatrixXd& X, Eigen::MatrixXd& Y, int block, double current) const {
    Eigen::MatrixXd& Z = block == 0 ? X : Y;
    const Eigen::MatrixXd grad = gradient(X, Y, block);
    const double smooth = data_loss(X, Y, p_);
    const Eigen::MatrixXd start = Z;

    for (double t = 1.0; t >= 1e-12; t *= 0.5) {
      Eigen::MatrixXd trial = start - t * grad;
      prox(trial, block, t);
      const Eigen::MatrixXd delta = trial - start;
      Z = trial;
      const double trial_smooth = data_loss(X, Y, p_);
      const double bound = smooth + (grad.array() * delta.array()).sum() + delta.squaredNorm() / (2.0 * t);
      if (std::isfinite(trial_smooth) && trial_smooth <= bound + 1e-12 * std::abs(bound)) {
        const double trial_obj = trial_smooth + regularizer(X, Y, cfg_.lambda, cfg_.anchor, n_tags_);
        if (trial_obj <= current) return trial_obj;
      }
    }
    Z = start;
    return current;
  }

 private:
  const SampledProblem& p_;
  const GlrmConfig& cfg_;
  Index n_tags_;

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int block) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(X.rows(), block == 0 ? X.cols() : Y.cols());
    for (std::size_t s = 0; s < p_.rows.size(); ++s) {
      const Index i = p_.rows[s];
      const Index j = p_.cols[s];
      const double d = grad_entry(X.col(i).dot(Y.col(j)), p_.labels[s]);
      if (block == 0) {
        g.col(i) += d * Y.col(j);
      } else {
        g.col(j) += d * X.col(i);
      }
    }
    return g;
  }

  void prox(Eigen::MatrixXd& Z, int block, double t) const {
    const double thr = t * cfg_.lambda;
    if (block == 0) {
      if (thr > 0.0) Z = soft_threshold(Z, thr);
      if (cfg_.nonneg_x) Z = Z.cwiseMax(0.0);
      return;
    }
    if (thr > 0.0) {
      for (Index j = 0; j < Z.cols(); ++j) {
        for (Index r = 0; r < Z.rows(); ++r) {
          if (is_anchor(cfg_.anchor, r, j, n_tags_)) continue;
          const double mag = std::abs(Z(r, j)) - thr;
          Z(r, j) = mag > 0.0 ? std::copysign(mag, Z(r, j)) : 0.0;
        }
      }
    }
    project_y(Z);
  }

  static Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& Z, double thr) {
    return Z.unaryExpr([thr](double v) {
      const double mag = std::abs(v) - thr;
      return mag > 0.0 ? std::copysign(mag, v) : 0.0;
    });
  }
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint64_t out[1];
  seq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out) + 2);
  return out[0];
}

constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kSvdStream = 3;

}  // namespace

double total_loss(const Factorization& f, const TernaryMatrix& A, const SampleMultiset& samples,
                  const GlrmConfig& cfg) {
  const Eigen::MatrixXd Y = f.Y();
  check_shapes(f.X, Y, A);
  if (f.tag_cols() != A.tag_cols()) throw Error(ErrorCode::ShapeMismatch, "tag split differs");
  const auto p = resolve(A, samples);
  return data_loss(f.X, Y, p) + regularizer(f.X, Y, cfg.lambda, cfg.anchor, A.tag_cols());
}

LossGradient sampled_gradient(const Factorization& f, const TernaryMatrix& A,
                              const SampleMultiset& samples) {
  const Eigen::MatrixXd Y = f.Y();
  check_shapes(f.X, Y, A);
  const auto p = resolve(A, samples);
  LossGradient g{Eigen::MatrixXd::Zero(f.X.rows(), f.X.cols()), Eigen::MatrixXd::Zero(Y.rows(), Y.cols())};
  for (std::size_t s = 0; s < p.rows.size(); ++s) {
    const Index i = p.rows[s];
    const Index j = p.cols[s];
    const double d = grad_entry(f.X.col(i).dot(Y.col(j)), p.labels[s]);
    g.X.col(i) += d * Y.col(j);
    g.Y.col(j) += d * f.X.col(i);
  }
  return g;
}

Factorization warm_start(const TernaryMatrix& A, const GlrmConfig& cfg) {
  cfg.validate();
  SvdOptions svd_opts;
  svd_opts.seed = stream_seed(cfg.seed, kSvdStream);
  svd_opts.tol = 1e-4;  // a low-accuracy SVD is enough for a starting point
  const TruncatedSvd svd = truncated_svd(A.impute_sparse(cfg.impute_fill), cfg.k, svd_opts);

  Factorization f;
  if (cfg.k == A.tag_cols()) {
    try {
      f = gg_lsi(svd, A.tag_cols());
    } catch (const Error& e) {
      if (cfg.anchor || e.code() != ErrorCode::IllConditionedTagBlock) throw;
      f = lsi_factorize(svd, A.tag_cols());
    }
  } else {
    f = lsi_factorize(svd, A.tag_cols());
  }

  if (cfg.noise_high > cfg.noise_low || cfg.noise_low != 0.0) {
    std::mt19937_64 rng(stream_seed(cfg.seed, kNoiseStream));
    std::uniform_real_distribution<double> noise(cfg.noise_low, cfg.noise_high);
    for (Index j = 0; j < f.X.cols(); ++j) {
      for (Index i = 0; i < f.X.rows(); ++i) f.X(i, j) += noise(rng);
    }
  }
  return f;
}

FitResult fit(const TernaryMatrix& A, const GlrmConfig& cfg, const std::optional<Factorization>& warm,
              const FitOptions& opts) {
  cfg.validate();
  if (cfg.anchor && cfg.k != A.tag_cols()) {
    throw Error(ErrorCode::KMismatch, "anchored fits need k = number of tags (k = " +
                                          std::to_string(cfg.k) + ", tags = " +
                                          std::to_string(A.tag_cols()) + ")");
  }

  const ObservedSet omega = A.observed_set();
  SampleMultiset samples;
  if (opts.samples) {
    samples = *opts.samples;
  } else if (cfg.subsample_c == 0.0) {
    samples = all_samples(omega);
  } else {
    if (omega.empty()) throw Error(ErrorCode::EmptyObservedSet, "no observed entries to sample from");
    const auto wanted = sample_count(A.rows(), A.cols(), cfg.k, cfg.subsample_c);
    const Index N = std::min<Index>(wanted, omega.size());
    samples = draw_subsample(omega, N, stream_seed(cfg.seed, kSampleStream));
  }
  if (samples.coords.empty()) throw Error(ErrorCode::EmptyObservedSet, "empty sample");
  const SampledProblem problem = resolve(A, samples);

  Factorization start = warm ? *warm : warm_start(A, cfg);
  if (start.rank() != cfg.k) throw Error(ErrorCode::ShapeMismatch, "warm start rank differs from k");
  Eigen::MatrixXd X = start.X;
  Eigen::MatrixXd Y = start.Y();
  check_shapes(X, Y, A);

  Optimizer opt(problem, cfg, A.tag_cols());
  if (cfg.nonneg_x) X = X.cwiseMax(0.0);
  opt.project_y(Y);

  FitResult result;
  result.seed = cfg.seed;
  result.n_samples = samples.size();

  double loss = opt.objective(X, Y);
  if (!std::isfinite(loss)) throw Error(ErrorCode::Diverged, "initial objective is not finite");
  result.loss_trace.push_back(loss);

  Factorization view;
  auto notify = [&](std::int64_t sweep) {
    if (!opts.on_sweep) return;
    view = Factorization::from_blocks(X, Y, A.tag_cols());
    opts.on_sweep(SweepState{sweep, loss, &view});
  };
  notify(0);

  for (std::int64_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    const double previous = loss;
    loss = opt.step(X, Y, 0, loss);
    loss = opt.step(X, Y, 1, loss);
    if (!std::isfinite(loss) || !X.allFinite() || !Y.allFinite()) {
      throw Error(ErrorCode::Diverged, "objective became non-finite at sweep " + std::to_string(sweep));
    }
    result.loss_trace.push_back(loss);
    result.sweeps = sweep;
    notify(sweep);
    if (std::abs(previous - loss) / std::max(previous, 1.0) < cfg.rel_tol) {
      result.converged = true;
      break;
    }
  }
  result.factors = Factorization::from_blocks(std::move(X), Y, A.tag_cols());
  return result;
}

}  // namespace semtag
