#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "unlearn/losses.hpp"
#include "unlearn/saliency.hpp"

using namespace unlearn;
using unlearn::testing::iota_indices;
using unlearn::testing::small_synthetic;
using unlearn::testing::TempDir;
using unlearn::testing::tiny_small_cnn;

namespace {

ParamGrads<float> grads_of(std::vector<std::vector<float>> values) {
  ParamGrads<float> g;
  int i = 0;
  for (auto& v : values) {
    const std::size_t n = v.size();
    g.add("p" + std::to_string(i++), Tensor<float>({n}, std::move(v)));
  }
  return g;
}

std::vector<float> flat(const ParamTable<float>& t) {
  std::vector<float> out;
  for (const auto& e : t) out.insert(out.end(), e.value.values().begin(), e.value.values().end());
  return out;
}

}  // namespace

TEST(SoftSaliency, ScalarValues) {
  EXPECT_EQ(soft_saliency(0.0), 0.0);
  EXPECT_NEAR(soft_saliency(1.0), 0.46211716, 1e-8);
  EXPECT_NEAR(soft_saliency(-1.0), 0.46211716, 1e-8);
  EXPECT_NEAR(soft_saliency(50.0), 1.0, 1e-12);
  // Equivalent to |2(sigmoid(g) - 0.5)|.
  for (const double g : {-7.0, -0.3, 0.01, 2.5}) {
    EXPECT_NEAR(soft_saliency(g), std::abs(2.0 * (1.0 / (1.0 + std::exp(-g)) - 0.5)), 1e-12);
  }
}

TEST(SoftSaliency, MaskIsInUnitIntervalAndMonotoneInMagnitude) {
  const auto g = grads_of({{0.0f, -0.5f, 2.0f}, {1e-3f, -40.0f}});
  const auto m = flat(soft_mask_from_gradients(g).values);
  EXPECT_EQ(m[0], 0.0f);
  EXPECT_LT(m[3], m[1]);
  EXPECT_LT(m[1], m[2]);
  EXPECT_LT(m[2], m[4]);
  for (const float v : m) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(HardSaliency, KeepsTheLargestMagnitudes) {
  const auto g = grads_of({{0.1f, -3.0f, 0.2f}, {2.0f, -0.05f, 1.0f}});
  const auto m = hard_mask_from_gradients(g, 0.5);
  EXPECT_EQ(m.mode, MaskMode::hard);
  EXPECT_EQ(flat(m.values), (std::vector<float>{0, 1, 0, 1, 0, 1}));
}

TEST(HardSaliency, TiesGoToEarlierCoordinates) {
  const auto g = grads_of({{1.0f, -1.0f}, {1.0f, 1.0f, 1.0f}});
  EXPECT_EQ(flat(hard_mask_from_gradients(g, 0.4).values), (std::vector<float>{1, 1, 0, 0, 0}));
}

TEST(HardSaliency, FractionOfOnesIsRoundedQTimesTotal) {
  const auto g = grads_of({std::vector<float>(1000, 0.0f)});
  for (const double q : {0.001, 0.1, 0.25, 0.5005, 1.0}) {
    const auto m = flat(hard_mask_from_gradients(g, q).values);
    EXPECT_EQ(std::count(m.begin(), m.end(), 1.0f), std::llround(q * 1000.0)) << q;
    EXPECT_EQ(std::count(m.begin(), m.end(), 0.0f) + std::count(m.begin(), m.end(), 1.0f), 1000);
  }
}

TEST(HardSaliency, InvalidSparsityIsAConfigError) {
  const auto g = grads_of({{1.0f}});
  EXPECT_THROW(hard_mask_from_gradients(g, 0.0), ConfigError);
  EXPECT_THROW(hard_mask_from_gradients(g, 1.5), ConfigError);
  EXPECT_THROW(hard_mask_from_gradients(g, std::nan("")), ConfigError);
}

TEST(ApplyMask, MultipliesElementwise) {
  const auto g = grads_of({{2.0f, -4.0f}, {8.0f}});
  SaliencyMask m;
  m.values = grads_of({{0.5f, 0.0f}, {1.0f}});
  EXPECT_EQ(flat(apply_mask(g, m)), (std::vector<float>{1.0f, 0.0f, 8.0f}));
  const auto ones = SaliencyMask::ones_like(g);
  EXPECT_EQ(flat(apply_mask(g, ones)), flat(g));
  SaliencyMask bad;
  bad.values = grads_of({{1.0f, 1.0f}});
  EXPECT_THROW(apply_mask(g, bad), UsageError);
}

TEST(ForgettingGradient, EqualsTheFullBatchGradientRegardlessOfChunking) {
  const auto data = small_synthetic(3, 8, 1);
  const auto model = build_classifier<float>(tiny_small_cnn(3), 4);
  const std::vector<std::size_t> forget{0, 3, 5, 7, 11, 20, 22};

  const auto fwd = model.infer(data.train.batch(forget), true);
  const auto loss = kl_uniform_loss(fwd.logits);
  const auto full = model.backward(Objective<float>::on_logits(fwd, loss.value, loss.grad));

  for (const std::size_t bs : {1u, 3u, 7u, 100u}) {
    const auto g = forgetting_gradient(model, data.train, forget, bs);
    const auto a = flat(g), b = flat(full);
    ASSERT_EQ(a.size(), b.size());
    double scale = 0.0;
    for (const float v : b) scale = std::max(scale, static_cast<double>(std::abs(v)));
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-5 * scale + 1e-9) << bs;
  }
}

TEST(ForgettingGradient, DoesNotChangeTheModel) {
  const auto data = small_synthetic(3, 4, 1);
  const auto model = build_classifier<float>(tiny_small_cnn(3), 4);
  const auto before = model.params();
  const auto before_buffers = model.buffers();
  forgetting_gradient(model, data.train, iota_indices(6), 4);
  EXPECT_EQ(model.params(), before);
  EXPECT_EQ(model.buffers(), before_buffers);
}

TEST(ComputeSaliency, ModesAndErrors) {
  const auto data = small_synthetic(3, 4, 1);
  const auto model = build_classifier<float>(tiny_small_cnn(3), 4);
  UnlearnConfig cfg;
  cfg.hard_sparsity = 0.3;
  const auto forget = iota_indices(5);
  const auto none = compute_saliency(model, data.train, forget, cfg, MaskMode::none);
  for (const float v : flat(none.values)) EXPECT_EQ(v, 1.0f);
  const auto soft = compute_saliency(model, data.train, forget, cfg, MaskMode::soft);
  EXPECT_TRUE(soft.values.congruent_with(model.params()));
  const auto hard = compute_saliency(model, data.train, forget, cfg, MaskMode::hard);
  const auto h = flat(hard.values);
  EXPECT_EQ(std::count(h.begin(), h.end(), 1.0f),
            std::llround(0.3 * static_cast<double>(h.size())));

  EXPECT_THROW(compute_saliency(model, data.train, {}, cfg, MaskMode::soft), ConfigError);
  cfg.hard_sparsity = 0.0;
  EXPECT_THROW(compute_saliency(model, data.train, forget, cfg, MaskMode::hard), ConfigError);
}

TEST(MaskFile, RoundTrip) {
  TempDir dir("mask");
  const auto g = grads_of({{0.3f, -2.0f, 1.0f}, {0.0f}});
  const auto m = hard_mask_from_gradients(g, 0.5);
  save_mask(dir / "m.mask", m);
  const auto r = load_mask(dir / "m.mask");
  EXPECT_EQ(r.mode, MaskMode::hard);
  EXPECT_EQ(r.sparsity, 0.5);
  EXPECT_EQ(r.values, m.values);
  EXPECT_THROW(load_mask(dir / "missing"), InputError);
}
