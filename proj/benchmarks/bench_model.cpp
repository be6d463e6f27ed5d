#include <benchmark/benchmark.h>

#include <random>

#include "unlearn/data.hpp"
#include "unlearn/losses.hpp"
#include "unlearn/model.hpp"

using namespace unlearn;

namespace {

Tensor<float> images(std::size_t n) {
  Tensor<float> t({n, kImageChannels, kImageSide, kImageSide});
  std::mt19937_64 rng(1);
  std::normal_distribution<float> nd;
  for (auto& v : t.values()) v = nd(rng);
  return t;
}

ArchitectureSpec spec_for(int which) {
  return which == 0 ? ArchitectureSpec::small_cnn(10) : ArchitectureSpec::resnet18_cifar(10);
}

void BM_Inference(benchmark::State& state) {
  const auto model = build_classifier<float>(spec_for(static_cast<int>(state.range(0))), 0);
  const auto x = images(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(x));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Inference)->Args({0, 64})->Args({1, 8})->Unit(benchmark::kMillisecond);

// One CE training step's forward and backward passes.
void BM_ForwardBackward(benchmark::State& state) {
  auto model = build_classifier<float>(spec_for(static_cast<int>(state.range(0))), 0);
  model.set_mode(Mode::train);
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto x = images(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 10);
  for (auto _ : state) {
    const auto fwd = model.forward(x, true);
    const auto l = retain_ce_loss(fwd.logits, std::span<const int>(labels));
    benchmark::DoNotOptimize(model.backward(Objective<float>::on_logits(fwd, l.value, l.grad)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_ForwardBackward)->Args({0, 64})->Args({1, 8})->Unit(benchmark::kMillisecond);

void BM_DecodeBatchFile(benchmark::State& state) {
  std::vector<std::uint8_t> bytes(30'730'000);
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i % 10);
  for (auto _ : state) benchmark::DoNotOptimize(decode_cifar_bytes(bytes, CifarLayout::cifar10, "b"));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_DecodeBatchFile)->Unit(benchmark::kMillisecond);

void BM_PositivePair(benchmark::State& state) {
  std::vector<std::uint8_t> px(kImagePixels, 90);
  const ImageSample sample{px, 3};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(augment_positive_pair(sample, {}, seed++));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PositivePair);

}  // namespace

BENCHMARK_MAIN();
