#include <benchmark/benchmark.h>

#include <random>

#include "relhartree/fock.hpp"
#include "relhartree/kernels.hpp"

using namespace relhartree;

namespace {

Mat random_dense(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Mat a(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) a(i, j) = cplx(g(rng), g(rng));
  return a;
}

RVec random_weight(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RVec w(n);
  for (Index i = 0; i < n; ++i) w[i] = u(rng);
  return w;
}

template <Mat (*F)(const RVec&, const Mat&, const RVec&)>
void BM_WeightedSandwich(benchmark::State& st) {
  const Index n = st.range(0);
  Mat a = random_dense(n, 1);
  RVec wl = random_weight(n, 2), wr = random_weight(n, 3);
  for (auto _ : st) benchmark::DoNotOptimize(F(wl, a, wr));
}

template <RVec (*F)(const space::SpaceSpec&, const RVec&, const RVec&)>
void BM_Convolution(benchmark::State& st) {
  space::SpaceSpec sp(1, 40.0, int(st.range(0)));
  RVec prof = random_weight(sp.size(), 4), rho = random_weight(sp.size(), 5);
  for (auto _ : st) benchmark::DoNotOptimize(F(sp, prof, rho));
}

template <RVec (*F)(const Mat&, const Mat&)>
void BM_ConjugatedDiagonal(benchmark::State& st) {
  const Index n = st.range(0);
  Mat u = random_dense(n, 6), a = random_dense(n, 7);
  for (auto _ : st) benchmark::DoNotOptimize(F(u, a));
}

template <std::vector<double> (*F)(const std::vector<Mat>&)>
void BM_TraceNorms(benchmark::State& st) {
  std::vector<Mat> ops;
  for (unsigned k = 0; k < 4; ++k) ops.push_back(random_dense(st.range(0), 10 + k));
  for (auto _ : st) benchmark::DoNotOptimize(F(ops));
}

template <Vec (*F)(const kernels::SpMat&, const Vec&)>
void BM_Spmv(benchmark::State& st) {
  auto engine = fock::FockEngine::doubled(int(st.range(0)));
  std::mt19937_64 rng(11);
  const Index M = engine.modes();
  auto L = fock::liouvillian(engine, fock::random_hermitian(int(M), rng), RMat::Ones(M, M) - RMat::Identity(M, M), 0.5);
  Vec x = fock::random_vector(engine.dim(), rng);
  for (auto _ : st) benchmark::DoNotOptimize(F(L.mat, x));
}

}  // namespace

BENCHMARK(BM_WeightedSandwich<kernels::serial::weighted_sandwich>)->Name("weighted_sandwich/serial")->Arg(256)->Arg(512);
BENCHMARK(BM_WeightedSandwich<kernels::parallel::weighted_sandwich>)->Name("weighted_sandwich/parallel")->Arg(256)->Arg(512);
BENCHMARK(BM_Convolution<kernels::serial::periodic_convolution>)->Name("periodic_convolution/serial")->Arg(256)->Arg(512);
BENCHMARK(BM_Convolution<kernels::parallel::periodic_convolution>)->Name("periodic_convolution/parallel")->Arg(256)->Arg(512);
BENCHMARK(BM_ConjugatedDiagonal<kernels::serial::conjugated_diagonal>)->Name("conjugated_diagonal/serial")->Arg(256)->Arg(512);
BENCHMARK(BM_ConjugatedDiagonal<kernels::parallel::conjugated_diagonal>)->Name("conjugated_diagonal/parallel")->Arg(256)->Arg(512);
BENCHMARK(BM_TraceNorms<kernels::serial::trace_norms>)->Name("trace_norms/serial")->Arg(128)->Arg(256);
BENCHMARK(BM_TraceNorms<kernels::parallel::trace_norms>)->Name("trace_norms/parallel")->Arg(128)->Arg(256);
BENCHMARK(BM_Spmv<kernels::serial::spmv>)->Name("spmv/serial")->Arg(5)->Arg(6);
BENCHMARK(BM_Spmv<kernels::parallel::spmv>)->Name("spmv/parallel")->Arg(5)->Arg(6);

BENCHMARK_MAIN();
