#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "semtag/error.hpp"
#include "semtag/glrm.hpp"

using namespace semtag;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

Eigen::MatrixXd random_dense(std::mt19937_64& rng, Index m, Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd A(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) A(i, j) = g(rng);
  return A;
}

TernaryMatrix random_ternary(std::mt19937_64& rng, Index m, Index nt, Index nf) {
  std::uniform_real_distribution<double> u;
  std::vector<Triplet> t;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < nt + nf; ++j) {
      const double r = u(rng);
      if (r < 0.35) t.push_back({i, j, TernaryValue::One});
      else if (j < nt && r < 0.55) t.push_back({i, j, TernaryValue::Missing});
    }
  }
  return TernaryMatrix::build(m, nt, nf, t);
}

// Data term straight from the definition, independent of the library.
double oracle_loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const TernaryMatrix& A,
                   const SampleMultiset& s) {
  double total = 0;
  for (const auto& c : s.coords) {
    double u = 0;
    for (Index t = 0; t < X.rows(); ++t) u += X(t, c.row) * Y(t, c.col);
    total += oracle::logistic(u, A.at(c.row, c.col) == TernaryValue::One ? 1 : 0);
  }
  return total;
}

}  // namespace

TEST_CASE("logistic loss values") {
  CHECK(logistic_loss(5.0, 1) == doctest::Approx(0.0067153485).epsilon(1e-9));
  CHECK(logistic_loss(5.0, 0) == doctest::Approx(5.0067153485).epsilon(1e-10));
  CHECK(logistic_loss(0.0, 0) == doctest::Approx(std::log(2.0)));
  CHECK(logistic_loss(0.0, 1) == doctest::Approx(std::log(2.0)));
  CHECK(logistic_loss(1000.0, 0) == doctest::Approx(1000.0));
  CHECK(logistic_loss(-1000.0, 0) >= 0.0);
  CHECK(logistic_loss(-1000.0, 0) < 1e-300);
  CHECK(std::isfinite(logistic_loss(-1e308, 1)));
  for (double u : {-7.5, -1.0, -0.1, 0.3, 2.0, 9.0}) {
    for (int a : {0, 1}) CHECK(logistic_loss(u, a) == doctest::Approx(oracle::logistic(u, a)).epsilon(1e-13));
  }
}

TEST_CASE("loss derivative matches central differences") {
  for (double u : {-20.0, -3.0, -0.5, 0.0, 0.7, 4.0, 25.0}) {
    for (int a : {0, 1}) {
      const double h = 1e-6;
      const double fd = (oracle::logistic(u + h, a) - oracle::logistic(u - h, a)) / (2 * h);
      CHECK(grad_entry(u, a) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
  CHECK(grad_entry(800.0, 0) == doctest::Approx(1.0));
  CHECK(grad_entry(-800.0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("sample count") {
  CHECK(sample_count(3, 11, 2, 2.0) == 48);
  CHECK(sample_count(200, 300, 1, 2.0) == 998);
  CHECK(sample_count(200, 300, 1, 0.05) == 25);  // 24.95 rounds up
  CHECK(sample_count(10, 20, 1, 0.1) == 3);      // 0.1 * 29 = 2.9
  CHECK(sample_count(11, 20, 1, 0.1) == 3);      // 0.1 * 30 is 3, not 4
  CHECK(sample_count(25161, 160110, 1, 1.0) == 185270);
  CHECK(code_of([] { sample_count(3, 4, 1, 0.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { sample_count(3, 4, 9, 1.0); }) == ErrorCode::InvalidRank);
}

TEST_CASE("subsampling draws from the observed set with replacement") {
  const auto A = fixture::toy_matrix();
  const auto omega = A.observed_set();
  const auto s = draw_subsample(omega, 5000, 42);
  CHECK(s.size() == 5000);
  CHECK(s.source_size == 29);
  std::map<std::pair<Index, Index>, int> hits;
  for (const auto& c : s.coords) {
    CHECK(omega.contains(c.row, c.col));
    ++hits[{c.row, c.col}];
  }
  CHECK(hits.size() == 29);
  // Every cell expects about 172 hits; a crude band catches non-uniform picks.
  for (const auto& [cell, n] : hits) {
    CHECK(n > 110);
    CHECK(n < 240);
  }
  const auto again = draw_subsample(omega, 5000, 42);
  CHECK(again.coords == s.coords);
  CHECK(draw_subsample(omega, 5000, 43).coords != s.coords);

  const auto all = all_samples(omega);
  CHECK(all.coords == omega.materialize());

  const auto empty = TernaryMatrix::build(1, 1, 0, std::vector<Triplet>{{0, 0, TernaryValue::Missing}});
  CHECK(code_of([&] { draw_subsample(empty.observed_set(), 3, 1); }) == ErrorCode::EmptyObservedSet);
  CHECK(code_of([&] { all_samples(empty.observed_set()); }) == ErrorCode::EmptyObservedSet);
}

TEST_CASE("soft threshold") {
  Eigen::VectorXd z(5);
  z << 3, -3, 0.5, -0.5, 1;
  Eigen::VectorXd want(5);
  want << 2, -2, 0, 0, 0;
  CHECK(prox_l1(z, 1.0) == want);
  CHECK(prox_l1(z, 0.0) == z);
}

TEST_CASE("L1 ball projection agrees with bisection") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    const double radius = trial % 3 == 0 ? 1.0 : 0.1 + 0.1 * (trial % 17);
    const Eigen::VectorXd v = random_dense(rng, n, 1, 1.5);
    const auto p = project_l1_ball(v, radius);
    const auto ref = oracle::l1_ball_bisection(std::vector<double>(v.data(), v.data() + n), radius);
    for (int i = 0; i < n; ++i) CHECK(p(i) == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-10));
    CHECK(p.cwiseAbs().sum() <= radius + 1e-12);
  }
  Eigen::Vector3d inside(0.2, -0.3, 0.1);
  CHECK(project_l1_ball(inside, 1.0) == inside);
}

TEST_CASE("anchor projection") {
  Eigen::VectorXd y(5);
  y << 0.3, 2.0, -0.9, 7.0, -7.0;  // first three are tags
  const auto p = prox_anchor(y, 1, 3);
  CHECK(p(1) == 1.0);
  CHECK(std::abs(p(0)) + std::abs(p(2)) <= 1.0 + 1e-12);
  CHECK(p(0) == doctest::Approx(0.2));
  CHECK(p(2) == doctest::Approx(-0.8));
  CHECK(p(3) == 7.0);
  CHECK(p(4) == -7.0);

  Eigen::Vector3d small(0.1, 0.5, 0.2);
  const auto q = prox_anchor(small, 0);
  CHECK(q(0) == 1.0);
  CHECK(q(1) == 0.5);
  CHECK(q(2) == 0.2);

  CHECK(code_of([&] { prox_anchor(y, 3, 3); }) == ErrorCode::AnchorOutOfTagBlock);
  CHECK(code_of([&] { prox_anchor(y, -1, 3); }) == ErrorCode::AnchorOutOfTagBlock);
}

TEST_CASE("sampled loss and gradient match independent references") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const Index k = 1 + trial % 3;
    const auto A = random_ternary(rng, 4 + trial % 3, 2, 3);
    const auto s = draw_subsample(A.observed_set(), 30, static_cast<std::uint64_t>(trial));
    Factorization f{random_dense(rng, k, A.rows()), random_dense(rng, k, 2), random_dense(rng, k, 3)};
    GlrmConfig cfg;
    cfg.lambda = 0.0;
    const Eigen::MatrixXd Y = f.Y();
    CHECK(total_loss(f, A, s, cfg) == doctest::Approx(oracle_loss(f.X, Y, A, s)).epsilon(1e-12));

    const auto g = sampled_gradient(f, A, s);
    std::vector<double> flat(f.X.data(), f.X.data() + f.X.size());
    flat.insert(flat.end(), Y.data(), Y.data() + Y.size());
    auto loss_of = [&](const std::vector<double>& v) {
      const Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(v.data(), k, A.rows());
      const Eigen::MatrixXd YY = Eigen::Map<const Eigen::MatrixXd>(v.data() + X.size(), k, A.cols());
      return oracle_loss(X, YY, A, s);
    };
    const auto fd = oracle::central_difference(loss_of, flat, 1e-5);
    std::vector<double> analytic(g.X.data(), g.X.data() + g.X.size());
    analytic.insert(analytic.end(), g.Y.data(), g.Y.data() + g.Y.size());
    for (std::size_t i = 0; i < fd.size(); ++i) CHECK(analytic[i] == doctest::Approx(fd[i]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("regularizer skips pinned anchors") {
  const auto A = fixture::toy_matrix();
  const auto s = all_samples(A.observed_set());
  Factorization f{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 9)};
  f.Y_f(0, 0) = -2.0;
  f.X(1, 2) = 0.5;
  GlrmConfig cfg;
  cfg.lambda = 0.1;
  const double data = oracle_loss(f.X, f.Y(), A, s);
  CHECK(total_loss(f, A, s, cfg) == doctest::Approx(data + 0.1 * 2.5));
  cfg.anchor = false;
  CHECK(total_loss(f, A, s, cfg) == doctest::Approx(data + 0.1 * 4.5));
}

TEST_CASE("loss refuses samples on missing cells and mismatched shapes") {
  const auto A = fixture::toy_matrix();
  SampleMultiset s;
  s.coords = {{0, 1}};
  Factorization f{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 9)};
  CHECK(code_of([&] { total_loss(f, A, s, GlrmConfig{}); }) == ErrorCode::InvalidArgument);
  Factorization wrong{Eigen::MatrixXd::Zero(2, 4), Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 9)};
  CHECK(code_of([&] { total_loss(wrong, A, all_samples(A.observed_set()), GlrmConfig{}); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    GlrmConfig c;
    mutate(c);
    return code_of([&] { c.validate(); });
  };
  CHECK(bad([](GlrmConfig& c) { c.k = 0; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](GlrmConfig& c) { c.lambda = -1; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](GlrmConfig& c) { c.subsample_c = -1; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](GlrmConfig& c) { c.noise_low = 1; c.noise_high = 0; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](GlrmConfig& c) { c.impute_fill = 2; }) == ErrorCode::InvalidConfig);
  CHECK(bad([](GlrmConfig& c) { c.lambda = std::numeric_limits<double>::quiet_NaN(); }) == ErrorCode::InvalidConfig);
  GlrmConfig ok;
  ok.validate();
}

TEST_CASE("warm start is the noised GG-LSI factorization") {
  const auto A = fixture::toy_matrix();
  GlrmConfig cfg;
  cfg.k = 2;
  cfg.seed = 3;
  const auto w = warm_start(A, cfg);
  const auto g = gg_lsi(truncated_svd(A.impute(0.5), 2), 2);
  CHECK(w.Y_t == g.Y_t);
  CHECK(w.Y_f == g.Y_f);
  const Eigen::MatrixXd dx = w.X - g.X;
  CHECK(dx.minCoeff() >= 0.0);
  CHECK(dx.maxCoeff() <= 1e-3);
  CHECK(dx.maxCoeff() > 0.0);

  cfg.noise_high = 0.0;
  CHECK(warm_start(A, cfg).X == g.X);

  // Off the anchored shape the plain LSI split is used.
  cfg.k = 1;
  cfg.anchor = false;
  const auto lsi = lsi_factorize(truncated_svd(A.impute(0.5), 1), 2);
  CHECK((warm_start(A, cfg).Y() - lsi.Y()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit is deterministic and descends") {
  const auto A = fixture::toy_matrix();
  GlrmConfig cfg;
  cfg.k = 2;
  cfg.lambda = 0.0;
  cfg.subsample_c = 0.0;
  cfg.seed = 7;
  cfg.max_sweeps = 500;
  std::int64_t calls = 0;
  FitOptions opts;
  opts.on_sweep = [&](const SweepState& s) {
    CHECK(s.sweep == calls);
    ++calls;
    for (Index t = 0; t < 2; ++t) {
      CHECK(s.factors->Y_t(t, t) == 1.0);
      CHECK(s.factors->Y_t.row(t).cwiseAbs().sum() - 1.0 <= 1.0 + 1e-9);
    }
  };
  const auto r = fit(A, cfg, std::nullopt, opts);
  CHECK(r.n_samples == 29);
  CHECK(calls == r.sweeps + 1);
  CHECK(r.loss_trace.size() == static_cast<std::size_t>(r.sweeps + 1));
  for (std::size_t s = 1; s < r.loss_trace.size(); ++s) CHECK(r.loss_trace[s] <= r.loss_trace[s - 1] + 1e-12);
  CHECK(r.final_loss() < r.loss_trace.front());
  CHECK(r.rng == "mt19937_64");
  CHECK(r.seed == 7);

  const auto again = fit(A, cfg);
  CHECK(again.loss_trace == r.loss_trace);
  CHECK(again.factors.X == r.factors.X);

  const auto s = all_samples(A.observed_set());
  CHECK(total_loss(r.factors, A, s, cfg) == doctest::Approx(r.final_loss()).epsilon(1e-12));
}

TEST_CASE("fit sample sizes") {
  const auto A = fixture::toy_matrix();
  GlrmConfig cfg;
  cfg.k = 2;
  cfg.max_sweeps = 3;
  cfg.subsample_c = 1.0;  // 24 draws, below |Omega|
  CHECK(fit(A, cfg).n_samples == 24);
  cfg.subsample_c = 2.0;  // 48 draws, capped at 29
  CHECK(fit(A, cfg).n_samples == 29);
  cfg.max_sweeps = 0;
  const auto none = fit(A, cfg);
  CHECK(none.loss_trace.size() == 1);
  CHECK(none.sweeps == 0);
}

TEST_CASE("a caller warm start is used without noise") {
  const auto A = fixture::toy_matrix();
  GlrmConfig cfg;
  cfg.k = 2;
  cfg.lambda = 0.0;
  cfg.subsample_c = 0.0;
  cfg.max_sweeps = 0;
  Factorization w{Eigen::MatrixXd::Constant(2, 3, 0.25), Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 9)};
  const auto r = fit(A, cfg, w);
  CHECK(r.factors.X == w.X);
  CHECK(r.final_loss() == doctest::Approx(oracle_loss(w.X, w.Y(), A, all_samples(A.observed_set()))));

  w.X(0, 0) = std::numeric_limits<double>::infinity();
  w.Y_f(0, 0) = -std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { fit(A, cfg, w); }) == ErrorCode::Diverged);
  Factorization rank3{Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(3, 9)};
  CHECK(code_of([&] { fit(A, cfg, rank3); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("fit preconditions") {
  const auto A = fixture::toy_matrix();
  GlrmConfig cfg;
  cfg.k = 1;
  CHECK(code_of([&] { fit(A, cfg); }) == ErrorCode::KMismatch);
  cfg.k = 2;
  cfg.lambda = -1;
  CHECK(code_of([&] { fit(A, cfg); }) == ErrorCode::InvalidConfig);
  const auto hollow = TernaryMatrix::build(2, 1, 0, std::vector<Triplet>{{0, 0, TernaryValue::Missing},
                                                                          {1, 0, TernaryValue::Missing}});
  GlrmConfig one;
  one.k = 1;
  CHECK(code_of([&] { fit(hollow, one); }) == ErrorCode::EmptyObservedSet);
}

TEST_CASE("constraints hold on random instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const Index nt = 2 + trial % 2;
    const auto A = random_ternary(rng, 6 + trial, nt, 5);
    GlrmConfig cfg;
    cfg.k = nt;
    cfg.seed = static_cast<std::uint64_t>(trial);
    cfg.lambda = 0.05 * (trial % 3);
    cfg.nonneg_y = trial % 2 == 1;
    cfg.max_sweeps = 200;
    FitOptions opts;
    opts.on_sweep = [&](const SweepState& s) {
      const auto& Yt = s.factors->Y_t;
      for (Index t = 0; t < nt; ++t) {
        CHECK(Yt(t, t) == 1.0);
        CHECK(Yt.row(t).cwiseAbs().sum() - 1.0 <= 1.0 + 1e-9);
      }
      if (cfg.nonneg_y) CHECK(s.factors->Y_f.minCoeff() >= 0.0);
    };
    try {
      const auto r = fit(A, cfg, std::nullopt, opts);
      for (std::size_t s = 1; s < r.loss_trace.size(); ++s) CHECK(r.loss_trace[s] <= r.loss_trace[s - 1] + 1e-12);
    } catch (const Error& e) {
      // Random tag blocks can be singular; that is the only acceptable failure.
      CHECK(e.code() == ErrorCode::IllConditionedTagBlock);
    }
  }
}

TEST_CASE("hypothetical topics fit with one extra anchor") {
  const auto A = fixture::toy_matrix().with_extra_tag_cols(1);
  GlrmConfig cfg;
  cfg.k = 3;
  cfg.max_sweeps = 300;
  cfg.impute_fill = 0.4;  // an all-0.5 column would duplicate the imputed shape of C
  try {
    const auto r = fit(A, cfg);
    CHECK(std::isfinite(r.final_loss()));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IllConditionedTagBlock);
  }
}
