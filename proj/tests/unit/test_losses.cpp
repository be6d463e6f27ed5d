#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"
#include "unlearn/losses.hpp"

using namespace unlearn;
using unlearn::testing::random_tensor;
using unlearn::testing::unit_rows;

namespace {

Tensor<double> logits(std::size_t b, std::size_t k, std::vector<double> v) {
  return Tensor<double>({b, k}, std::move(v));
}

double entropy(std::span<const double> row) {
  double m = -1e300;
  for (const double v : row) m = std::max(m, v);
  double z = 0.0;
  for (const double v : row) z += std::exp(v - m);
  double h = 0.0;
  for (const double v : row) {
    const double p = std::exp(v - m) / z;
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

TEST(KlUniform, EqualLogitsGiveZero) {
  const auto l = kl_uniform_loss(logits(2, 4, {1, 1, 1, 1, -3, -3, -3, -3}));
  EXPECT_NEAR(l.value, 0.0, 1e-7);
  for (const double g : l.grad.values()) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(KlUniform, TwoClassWorkedExample) {
  // p = (0.75, 0.25): 0.75 ln 1.5 + 0.25 ln 0.5
  EXPECT_NEAR(kl_uniform_loss(logits(1, 2, {std::log(3.0), 0.0})).value, 0.13081204, 1e-7);
}

TEST(KlUniform, SaturatesAtLogK) {
  EXPECT_NEAR(kl_uniform_loss(logits(1, 2, {30.0, -30.0})).value, std::log(2.0), 1e-4);
}

TEST(KlUniform, EqualsLogKMinusMeanEntropy) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> kd(2, 12), bd(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = static_cast<std::size_t>(kd(rng)), b = static_cast<std::size_t>(bd(rng));
    const auto z = random_tensor<double>({b, k}, 100 + trial, 3.0);
    double h = 0.0;
    for (std::size_t i = 0; i < b; ++i) h += entropy(z.row(i));
    const double expected = std::log(static_cast<double>(k)) - h / static_cast<double>(b);
    const auto l = kl_uniform_loss(z);
    EXPECT_NEAR(l.value, expected, 1e-6);
    EXPECT_GE(l.value, 0.0);
  }
}

TEST(KlUniform, Errors) {
  auto z = logits(1, 3, {0, 1, std::numeric_limits<double>::infinity()});
  EXPECT_THROW(kl_uniform_loss(z), NumericError);
  z[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(kl_uniform_loss(z), NumericError);
  EXPECT_THROW(kl_uniform_loss(logits(1, 1, {0})), InputError);
}

TEST(RetainCe, UniformPredictionIsLogK) {
  const std::vector<int> y{3, 7};
  EXPECT_NEAR(retain_ce_loss(Tensor<double>({2, 10}, 0.5), std::span<const int>(y)).value,
              std::log(10.0), 1e-12);
}

TEST(RetainCe, ConfidentCorrectPredictionIsNearZero) {
  Tensor<double> z({1, 10}, -30.0);
  z[4] = 30.0;
  const std::vector<int> y{4};
  EXPECT_NEAR(retain_ce_loss(z, std::span<const int>(y)).value, 0.0, 1e-6);
}

TEST(RetainCe, TwoClassWorkedExample) {
  const std::vector<int> y{0};
  EXPECT_NEAR(retain_ce_loss(logits(1, 2, {std::log(3.0), 0.0}), std::span<const int>(y)).value,
              0.28768207, 1e-7);
}

TEST(RetainCe, LabelOutOfRangeIsAnInputError) {
  const std::vector<int> bad{2};
  EXPECT_THROW(retain_ce_loss(logits(1, 2, {0, 0}), std::span<const int>(bad)), InputError);
  const std::vector<int> neg{-1};
  EXPECT_THROW(retain_ce_loss(logits(1, 2, {0, 0}), std::span<const int>(neg)), InputError);
  const std::vector<int> short_labels{};
  EXPECT_THROW(retain_ce_loss(logits(1, 2, {0, 0}), std::span<const int>(short_labels)),
               InputError);
}

TEST(RetainCe, PerSampleMatchesBatchMean) {
  const auto z = random_tensor<double>({5, 4}, 9);
  const std::vector<int> y{0, 1, 2, 3, 0};
  const auto per = per_sample_ce(z, std::span<const int>(y));
  double mean = 0.0;
  for (const double v : per) mean += v / 5.0;
  EXPECT_NEAR(mean, retain_ce_loss(z, std::span<const int>(y)).value, 1e-12);
}

namespace {

Tensor<double> vec2(double x, double y) { return Tensor<double>({1, 2}, {x, y}); }

}  // namespace

TEST(Contrastive, WorkedExampleAtTau14) {
  // sim(z, z') = 1 and one orthogonal negative.
  const auto c = contrastive_forget_loss(vec2(1, 0), vec2(1, 0), vec2(0, 1), 1.4);
  EXPECT_NEAR(c.value, 0.39846846, 1e-7);
}

TEST(Contrastive, EqualSimilaritiesGiveLogNPlusOne) {
  const auto one = contrastive_forget_loss(vec2(1, 0), vec2(0, 1), vec2(0, -1), 1.4);
  EXPECT_NEAR(one.value, std::log(2.0), 1e-12);
  Tensor<double> negs({3, 2}, {0, 1, 0, -1, 0, 1});
  EXPECT_NEAR(contrastive_forget_loss(vec2(1, 0), vec2(0, 1), negs, 0.7).value, std::log(4.0),
              1e-12);
}

TEST(Contrastive, IncreasingANegativeSimilarityIncreasesTheLoss) {
  const auto z = vec2(1, 0);
  double prev = -1.0;
  for (int i = 0; i <= 8; ++i) {
    const double angle = std::numbers::pi * (1.0 - i / 8.0);  // similarity rises from -1 to 1
    const double v = contrastive_forget_loss(z, vec2(std::cos(0.3), std::sin(0.3)),
                                             vec2(std::cos(angle), std::sin(angle)), 1.4)
                         .value;
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(Contrastive, DecreasingInPositiveSimilarityAndAlwaysPositive) {
  const auto z = vec2(1, 0);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 8; ++i) {
    const double angle = std::numbers::pi * (1.0 - i / 8.0);
    const double v =
        contrastive_forget_loss(z, vec2(std::cos(angle), std::sin(angle)), vec2(0, 1), 1.4).value;
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    prev = v;
  }
}

TEST(Contrastive, InvariantUnderPermutationOfNegatives) {
  const auto a = unit_rows<double>(3, 5, 1);
  const auto p = unit_rows<double>(3, 5, 2);
  const auto n = unit_rows<double>(4, 5, 3);
  Tensor<double> perm(n.shape());
  const std::size_t order[] = {2, 0, 3, 1};
  for (std::size_t i = 0; i < 4; ++i) {
    std::copy(n.row(order[i]).begin(), n.row(order[i]).end(), perm.row(i).begin());
  }
  EXPECT_NEAR(contrastive_forget_loss(a, p, n, 1.4).value,
              contrastive_forget_loss(a, p, perm, 1.4).value, 1e-12);
}

TEST(Contrastive, Errors) {
  EXPECT_THROW(contrastive_forget_loss(vec2(1, 0), vec2(1, 0), Tensor<double>({0, 2}), 1.4),
               UsageError);
  EXPECT_THROW(contrastive_forget_loss(vec2(1, 0), vec2(1, 0), vec2(0, 1), 0.0), ConfigError);
  EXPECT_THROW(contrastive_forget_loss(vec2(1, 0), vec2(1, 0), vec2(0, 1), -1.0), ConfigError);
  EXPECT_THROW(contrastive_forget_loss(vec2(2, 0), vec2(1, 0), vec2(0, 1), 1.4), UsageError);
}

TEST(Contrastive, FloatAndDoubleAgree) {
  const auto a = unit_rows<double>(2, 8, 4);
  const auto p = unit_rows<double>(2, 8, 5);
  const auto n = unit_rows<double>(3, 8, 6);
  EXPECT_NEAR(contrastive_forget_loss(a, p, n, 1.4).value,
              contrastive_forget_loss(a.cast<float>(), p.cast<float>(), n.cast<float>(), 1.4).value,
              1e-6);
}
