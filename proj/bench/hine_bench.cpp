#include <benchmark/benchmark.h>

#include <omp.h>

#include "hine/eval.hpp"
#include "hine/graph.hpp"
#include "hine/rng.hpp"
#include "hine/sampler.hpp"
#include "hine/serial.hpp"

namespace {

hine::HinGraph ring_graph(std::size_t n) {
  hine::HinGraph::Builder b;
  for (std::size_t v = 0; v < n; ++v) b.add_node("n" + std::to_string(v));
  auto near = b.add_edge_type("near");
  auto far = b.add_edge_type("far");
  for (std::size_t v = 0; v < n; ++v) {
    b.add_edge(static_cast<hine::NodeId>(v), near, static_cast<hine::NodeId>((v + 1) % n));
    b.add_edge(static_cast<hine::NodeId>(v), far, static_cast<hine::NodeId>((v * 7 + 3) % n));
  }
  return std::move(b).build();
}

hine::EmbeddingTable random_table(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  hine::EmbeddingTable t(rows, dim);
  auto rng = hine::make_rng(seed);
  std::normal_distribution<double> g;
  for (double& x : t.data()) x = g(rng);
  return t;
}

hine::SamplerConfig walk_config() {
  hine::SamplerConfig cfg;
  cfg.walks_per_node = 10;
  cfg.max_walk_length = 40;
  return cfg;
}

void BM_WalksSerial(benchmark::State& state) {
  auto g = ring_graph(2000);
  auto cfg = walk_config();
  for (auto _ : state) benchmark::DoNotOptimize(hine::serial::random_walks(g, cfg));
}
BENCHMARK(BM_WalksSerial)->Unit(benchmark::kMillisecond);

void BM_WalksOpenMP(benchmark::State& state) {
  auto g = ring_graph(2000);
  auto cfg = walk_config();
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(hine::random_walks(g, cfg));
}
BENCHMARK(BM_WalksOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_AssignSerial(benchmark::State& state) {
  auto x = random_table(20000, 30, 1);
  auto c = random_table(20, 30, 2);
  std::vector<int> a;
  for (auto _ : state) {
    a.assign(x.rows(), -1);
    benchmark::DoNotOptimize(hine::serial::kmeans_assign(x, c.data(), 20, a));
  }
}
BENCHMARK(BM_AssignSerial)->Unit(benchmark::kMillisecond);

void BM_AssignOpenMP(benchmark::State& state) {
  auto x = random_table(20000, 30, 1);
  auto c = random_table(20, 30, 2);
  std::vector<int> a;
  for (auto _ : state) {
    a.assign(x.rows(), -1);
    benchmark::DoNotOptimize(hine::kmeans_assign(x, c.data(), 20, a, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_AssignOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

std::vector<int> classes(std::size_t n, int k) {
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<int>(i % static_cast<std::size_t>(k));
  return out;
}

void BM_MapSerial(benchmark::State& state) {
  auto x = random_table(1500, 30, 3);
  auto y = classes(x.rows(), 8);
  for (auto _ : state) benchmark::DoNotOptimize(hine::serial::map_at_k(x, y, 100, hine::Similarity::kCosine));
}
BENCHMARK(BM_MapSerial)->Unit(benchmark::kMillisecond);

void BM_MapOpenMP(benchmark::State& state) {
  auto x = random_table(1500, 30, 3);
  auto y = classes(x.rows(), 8);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        hine::map_at_k(x, y, 100, hine::Similarity::kCosine, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_MapOpenMP)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
