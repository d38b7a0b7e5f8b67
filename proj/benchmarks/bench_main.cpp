#include <benchmark/benchmark.h>

#include <random>

#include "semtag/factorization.hpp"
#include "semtag/glrm.hpp"
#include "semtag/ternary_matrix.hpp"

using namespace semtag;

namespace {

TernaryMatrix random_ternary(Index m, Index nt, Index nf, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  std::vector<Triplet> t;
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < nt + nf; ++j) {
      const double r = u(rng);
      if (r < density) t.push_back({i, j, TernaryValue::One});
      else if (j < nt && r < 1.5 * density) t.push_back({i, j, TernaryValue::Missing});
    }
  return TernaryMatrix::build(m, nt, nf, t);
}

void BM_DenseSvd(benchmark::State& state) {
  const Index n = state.range(0);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Random(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(truncated_svd(A, 8));
}
BENCHMARK(BM_DenseSvd)->Arg(64)->Arg(256)->Arg(512);

void BM_SparseSvd(benchmark::State& state) {
  const auto A = random_ternary(state.range(0), 20, state.range(0), 0.01, 1);
  const auto S = A.impute_sparse(0.5);
  SvdOptions opts;
  opts.tol = 1e-4;  // same tolerance as the fit's warm start
  for (auto _ : state) benchmark::DoNotOptimize(truncated_svd(S, 8, opts));
}
BENCHMARK(BM_SparseSvd)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_LossAndGradient(benchmark::State& state) {
  const auto A = random_ternary(500, 20, 800, 0.05, 2);
  const Index k = 20;
  const auto samples = draw_subsample(A.observed_set(), state.range(0), 3);
  Factorization f{Eigen::MatrixXd::Random(k, 500), Eigen::MatrixXd::Random(k, 20), Eigen::MatrixXd::Random(k, 800)};
  GlrmConfig cfg;
  cfg.k = k;
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_loss(f, A, samples, cfg));
    benchmark::DoNotOptimize(sampled_gradient(f, A, samples));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGradient)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_ToyFit(benchmark::State& state) {
  std::vector<Triplet> t = {{0, 0, TernaryValue::One}, {1, 1, TernaryValue::One}, {2, 0, TernaryValue::Missing},
                            {2, 1, TernaryValue::Missing}};
  for (Index j = 2; j < 11; ++j) t.push_back({j % 3, j, TernaryValue::One});
  const auto A = TernaryMatrix::build(3, 2, 9, t);
  GlrmConfig cfg;
  cfg.k = 2;
  cfg.subsample_c = 0.0;
  cfg.max_sweeps = 500;
  for (auto _ : state) benchmark::DoNotOptimize(fit(A, cfg));
}
BENCHMARK(BM_ToyFit)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
