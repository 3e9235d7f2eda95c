// Parallel kernels against their serial reference implementations.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "pfcast/gbt.hpp"
#include "pfcast/seqnet.hpp"

namespace {

pfcast::FeatureMatrix random_matrix(std::size_t rows, std::size_t features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(0, 40);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols(features, std::vector<double>(rows));
  for (std::size_t j = 0; j < features; ++j) {
    names.push_back("f" + std::to_string(j));
    for (auto& v : cols[j]) v = level(rng);
  }
  std::vector<double> y(rows);
  for (std::size_t i = 0; i < rows; ++i) y[i] = 0.1 * cols[0][i] + noise(rng);
  return {names, cols, y, std::vector<int>(rows, 0), std::vector<pfcast::RowKey>(rows)};
}

void BM_gbt_level_splits(benchmark::State& state) {
  const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 16, 1);
  const pfcast::gbt::SortedColumns sorted(x);
  std::vector<double> g(x.n_rows()), h(x.n_rows(), 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -x.target()[i];
  std::vector<int> node(x.n_rows(), 0);
  pfcast::gbt::GbtParams p;
  for (auto _ : state) benchmark::DoNotOptimize(pfcast::gbt::find_level_splits(x, sorted, node, 1, g, h, p));
}
BENCHMARK(BM_gbt_level_splits)->Arg(200)->Arg(2000);

void BM_gbt_split_exhaustive(benchmark::State& state) {
  const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 16, 1);
  std::vector<double> g(x.n_rows()), h(x.n_rows(), 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -x.target()[i];
  std::vector<std::size_t> rows(x.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  pfcast::gbt::GbtParams p;
  for (auto _ : state) benchmark::DoNotOptimize(pfcast::gbt::reference::best_split_exhaustive(x, rows, g, h, p));
}
BENCHMARK(BM_gbt_split_exhaustive)->Arg(200)->Arg(2000);

struct SeqFixture {
  pfcast::SequenceSet set;
  pfcast::seqnet::SeqNetModel model;
  std::vector<std::size_t> rows;

  explicit SeqFixture(std::size_t n) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> u(0.0, 1.0);
    set.window = 12;
    set.dynamic_names = {"a", "b", "c", "d", "e", "f"};
    set.static_names = {"s0", "s1", "s2", "s3"};
    set.dynamic.resize(n * 12 * 6);
    set.statics.resize(n * 4);
    for (auto& v : set.dynamic) v = u(rng);
    for (auto& v : set.statics) v = u(rng);
    set.target.resize(n);
    for (auto& v : set.target) v = u(rng);
    set.date_block.assign(n, 0);
    set.row_keys.assign(n, {});
    model = pfcast::seqnet::init_model({6, 4, 32, 16, 32}, 3);
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
};

void BM_seqnet_backward(benchmark::State& state) {
  SeqFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pfcast::seqnet::backward(f.model, f.set, f.rows, 0.001));
}
BENCHMARK(BM_seqnet_backward)->Arg(512);

void BM_seqnet_backward_serial(benchmark::State& state) {
  SeqFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pfcast::seqnet::reference::backward_serial(f.model, f.set, f.rows, 0.001));
  }
}
BENCHMARK(BM_seqnet_backward_serial)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
