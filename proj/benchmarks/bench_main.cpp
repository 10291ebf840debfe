#include <benchmark/benchmark.h>

#include <random>

#include "blsat/functional_bl.hpp"
#include "blsat/gaussian_transport.hpp"

using namespace blsat;

namespace {

SymmetricMatrix random_spd(int n, std::mt19937_64& rng) {
  return wishart_sample(n, rng) + SymmetricMatrix::scalar(n, 0.1);
}

void BM_SymEigen(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto m = random_spd(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eigen(m));
}
BENCHMARK(BM_SymEigen)->Arg(4)->Arg(16)->Arg(64);

void BM_Barycenter(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int n = static_cast<int>(state.range(0));
  std::vector<SymmetricMatrix> b;
  for (int i = 0; i < 4; ++i) b.push_back(random_spd(n, rng));
  const auto t = make_tuple(b, Convention::covariance);
  for (auto _ : state) benchmark::DoNotOptimize(barycenter_fixed_point(t));
}
BENCHMARK(BM_Barycenter)->Arg(2)->Arg(4)->Arg(8);

void BM_Legendre1D(benchmark::State& state) {
  const auto f = grid::quartic(1.0, 0.05, 8.0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(legendre_transform(f));
}
BENCHMARK(BM_Legendre1D)->Arg(401)->Arg(1601);

void BM_Legendre2D(benchmark::State& state) {
  const auto f = grid::gaussian(1.0, 6.0, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(legendre_transform(f));
}
BENCHMARK(BM_Legendre2D)->Arg(81)->Arg(161);

void BM_Convolve(benchmark::State& state) {
  const auto f = grid::quartic(1.0, 0.02, 10.0, static_cast<int>(state.range(0)));
  const auto method = state.range(1) ? ConvolutionMethod::fft : ConvolutionMethod::direct;
  for (auto _ : state) benchmark::DoNotOptimize(convolve(f, f, method));
}
BENCHMARK(BM_Convolve)->Args({801, 0})->Args({801, 1})->Args({2001, 0})->Args({2001, 1});

void BM_KwOptimize(benchmark::State& state) {
  const auto d = kw_datum(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(optimize_kw_constant(d, 4, 7));
}
BENCHMARK(BM_KwOptimize)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
