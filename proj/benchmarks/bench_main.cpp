#include <benchmark/benchmark.h>

#include "ecechain/eval/ranking.hpp"
#include "ecechain/graph/ece.hpp"
#include "ecechain/model/eceformer.hpp"
#include "ecechain/nn/ops.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace ecechain;

namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  Rng rng(1);
  auto a = fixtures::random_tensor<float>({n, n}, rng, -1.0f, 1.0f, false);
  auto b = fixtures::random_tensor<float>({n, n}, rng, -1.0f, 1.0f, false);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nn::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * std::int64_t(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_LayerNormBackward(benchmark::State& state) {
  Rng rng(2);
  auto x = fixtures::random_tensor<float>({512, 320}, rng, -1.0f, 1.0f);
  auto gain = fixtures::random_tensor<float>({320}, rng, 0.5f, 1.5f);
  auto bias = fixtures::random_tensor<float>({320}, rng, -0.1f, 0.1f);
  for (auto _ : state) nn::sum(nn::layer_norm(x, gain, bias, 1e-5f)).backward();
}
BENCHMARK(BM_LayerNormBackward);

model::ModelConfig bench_model(const data::Dataset& ds, std::size_t dim) {
  model::ModelConfig c;
  c.entity_count = ds.vocabs.entity_count();
  c.relation_count = ds.vocabs.relation_count();
  c.time_count = ds.vocabs.time_count();
  c.dim = dim;
  c.heads = 4;
  c.ff_hidden = 2 * dim;
  c.mixer_hidden = 2 * dim;
  c.encoder_units = 2;
  c.mixer_units = 2;
  c.max_neighbors = 8;
  return c;
}

std::vector<graph::Ece> bench_batch(const data::Dataset& ds, std::size_t count) {
  const auto index = graph::build_index(ds.split.train, ds.vocabs);
  const auto queries = data::augment_reciprocal(ds.split.train, ds.vocabs);
  Rng rng(3);
  std::vector<graph::Ece> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(graph::build_ece(queries[i % queries.size()], index, {8, true, false}, true, rng));
  }
  return out;
}

void BM_ForwardBackward(benchmark::State& state) {
  const auto ds = fixtures::periodic_dataset();
  model::EceFormer<float> m(bench_model(ds, std::size_t(state.range(0))));
  m.initialize(4);
  const auto batch = bench_batch(ds, 64);
  for (auto _ : state) {
    m.parameters().zero_grad();
    m.loss(batch, 1.0f).total.backward();
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Represent(benchmark::State& state) {
  const auto ds = fixtures::periodic_dataset();
  model::EceFormer<float> m(bench_model(ds, 64));
  m.initialize(5);
  const auto batch = bench_batch(ds, 256);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(m.entity_scores(m.represent(batch)));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Represent)->Unit(benchmark::kMillisecond);

void BM_BuildEce(benchmark::State& state) {
  const auto ds = fixtures::periodic_dataset(200, 8, 200, 180, 10);
  const auto index = graph::build_index(ds.split.train, ds.vocabs);
  const auto queries = data::augment_reciprocal(ds.split.test, ds.vocabs);
  const graph::EceOptions opts{std::size_t(state.range(0)), true, false};
  Rng rng(6);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(graph::build_ece(queries[i++ % queries.size()], index, opts, false, rng));
}
BENCHMARK(BM_BuildEce)->Arg(10)->Arg(50);

void BM_RankTarget(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  Rng rng(7);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> scores(n);
  for (auto& s : scores) s = dist(rng);
  const std::vector<std::size_t> filtered = {1, 5, 9, 13};
  for (auto _ : state) benchmark::DoNotOptimize(eval::rank_target<float>(scores, 3, filtered));
}
BENCHMARK(BM_RankTarget)->Arg(7128)->Arg(23033);

}  // namespace
BENCHMARK_MAIN();
