// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "imbmix/kernels.hpp"

using namespace imbmix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (double& v : m.values()) v = nd(gen);
  return m;
}

template <auto Fn>
void BM_affine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = random_matrix(n, 64, 1);
  const Matrix w = random_matrix(64, 64, 2);
  const std::vector<double> b(64, 0.1);
  Matrix out;
  for (auto _ : state) {
    Fn(x, w, b, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <auto Fn>
void BM_knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix pts = random_matrix(n, 16, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pts, {}, 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <auto Fn>
void BM_margins(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix z = random_matrix(n, 10, 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 10);
  std::vector<double> out(n);
  for (auto _ : state) {
    Fn(z, y, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_affine<kernels::serial::affine>)->Name("affine/serial")->Arg(1024)->Arg(8192);
BENCHMARK(BM_affine<kernels::parallel::affine>)->Name("affine/parallel")->Arg(1024)->Arg(8192)->UseRealTime();
BENCHMARK(BM_knn<kernels::serial::knn>)->Name("knn/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_knn<kernels::parallel::knn>)->Name("knn/parallel")->Arg(500)->Arg(2000)->UseRealTime();
BENCHMARK(BM_margins<kernels::serial::example_margins>)->Name("margins/serial")->Arg(10000)->Arg(100000);
BENCHMARK(BM_margins<kernels::parallel::example_margins>)->Name("margins/parallel")->Arg(10000)->Arg(100000)->UseRealTime();

BENCHMARK_MAIN();
