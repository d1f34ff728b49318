#include <random>

#include <benchmark/benchmark.h>

#include "cimllm/features.hpp"
#include "cimllm/schema.hpp"
#include "cimllm/synthetic.hpp"
#include "cimllm/voxel_ops.hpp"

using namespace cimllm;

namespace {

BinaryMask speckle(std::size_t n, double density) {
  const Geometry g{{n, n, n}, {1.0, 1.2, 2.0}, diagonal_affine({1.0, 1.2, 2.0})};
  BinaryMask m(g);
  std::mt19937_64 rng(1);
  std::bernoulli_distribution on(density);
  for (std::size_t v = 0; v < m.size(); ++v) {
    if (on(rng)) m.set(v);
  }
  return m;
}

void BM_SquaredEdt(benchmark::State& state) {
  const auto m = speckle(static_cast<std::size_t>(state.range(0)), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(voxel::squared_edt(m));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_SquaredEdt)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_LabelComponents(benchmark::State& state) {
  const auto m = speckle(static_cast<std::size_t>(state.range(0)), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(voxel::label_components(m, voxel::Connectivity::TwentySix));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_LabelComponents)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ExtractFeatures(benchmark::State& state) {
  SyntheticSpec spec;
  const auto n = static_cast<std::size_t>(state.range(0));
  spec.dims = {n, n, n};
  const auto bundle = make_synthetic_subject(spec);
  const auto atlases = synthetic_atlas_config();
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(bundle, atlases));
}
BENCHMARK(BM_ExtractFeatures)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Serialize(benchmark::State& state) {
  SyntheticSpec spec;
  spec.dims = {48, 48, 40};
  const auto bundle = make_synthetic_subject(spec);
  const auto doc = make_document(bundle, extract_features(bundle, synthetic_atlas_config()), {});
  for (auto _ : state) benchmark::DoNotOptimize(parse_document(serialize(doc)));
}
BENCHMARK(BM_Serialize);

}  // namespace
BENCHMARK_MAIN();
