#include <benchmark/benchmark.h>

#include <random>

#include "unlearn/losses.hpp"
#include "unlearn/saliency.hpp"

using namespace unlearn;

namespace {

Tensor<float> gaussian(Shape shape, std::uint64_t seed) {
  Tensor<float> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  for (auto& v : t.values()) v = nd(rng);
  return t;
}

Tensor<float> unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  auto t = gaussian({n, d}, seed);
  for (std::size_t i = 0; i < n; ++i) {
    float sq = 0;
    for (const float v : t.row(i)) sq += v * v;
    for (float& v : t.row(i)) v /= std::sqrt(sq);
  }
  return t;
}

void BM_KlUniform(benchmark::State& state) {
  const auto logits = gaussian({static_cast<std::size_t>(state.range(0)), 10}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kl_uniform_loss(logits));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KlUniform)->Arg(256)->Arg(4096);

void BM_RetainCe(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto logits = gaussian({n, 100}, 2);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 100);
  for (auto _ : state) benchmark::DoNotOptimize(retain_ce_loss(logits, std::span<const int>(labels)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RetainCe)->Arg(256)->Arg(4096);

// Forget batch against a retain batch of the same size.
void BM_Contrastive(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const auto a = unit_rows(b, 128, 3), p = unit_rows(b, 128, 4), n = unit_rows(b, 128, 5);
  for (auto _ : state) benchmark::DoNotOptimize(contrastive_forget_loss(a, p, n, 1.4));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Contrastive)->Arg(64)->Arg(256);

ParamGrads<float> grads(std::size_t n) {
  ParamGrads<float> g;
  g.add("w", gaussian({n}, 6));
  return g;
}

void BM_SoftMask(benchmark::State& state) {
  const auto g = grads(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(soft_mask_from_gradients(g));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SoftMask)->Arg(600'000)->Arg(11'000'000)->Unit(benchmark::kMillisecond);

void BM_HardMask(benchmark::State& state) {
  const auto g = grads(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(hard_mask_from_gradients(g, 0.5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HardMask)->Arg(600'000)->Arg(11'000'000)->Unit(benchmark::kMillisecond);

void BM_ApplyMask(benchmark::State& state) {
  const auto g = grads(static_cast<std::size_t>(state.range(0)));
  const auto m = soft_mask_from_gradients(g);
  for (auto _ : state) benchmark::DoNotOptimize(apply_mask(g, m));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ApplyMask)->Arg(600'000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
