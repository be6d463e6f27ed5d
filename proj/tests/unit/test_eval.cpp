#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <limits>

#include "test_support.hpp"
#include "unlearn/eval.hpp"

using namespace unlearn;
using unlearn::testing::iota_indices;
using unlearn::testing::narrow_small_cnn;
using unlearn::testing::small_synthetic;
using unlearn::testing::TempDir;

TEST(AvgGap, MeanOfTheFourGaps) {
  const auto start = std::chrono::steady_clock::now();
  EXPECT_NEAR(avg_gap(MetricGaps{4.77, 0.12, 0.02, 10.18}), 3.7725, 1e-12);
  EXPECT_NEAR(avg_gap(MetricGaps{0.89, 0.61, 0.76, 3.92}), 1.545, 1e-12);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(AvgGap, FromReportsUsesAbsoluteDifferences) {
  MetricsReport ref, r;
  ref.ua = 10;
  ref.ra = 90;
  ref.ta = 80;
  ref.mia = 20;
  r.ua = 14;
  r.ra = 92;
  r.ta = 79;
  r.mia = 20;
  const auto g = metric_gaps(r, ref);
  EXPECT_DOUBLE_EQ(g.ua, 4);
  EXPECT_DOUBLE_EQ(g.ra, 2);
  EXPECT_DOUBLE_EQ(g.ta, 1);
  EXPECT_DOUBLE_EQ(g.mia, 0);
  EXPECT_DOUBLE_EQ(avg_gap(r, ref), 1.75);
  EXPECT_DOUBLE_EQ(avg_gap(ref, ref), 0.0);
  r.attach_reference(ref);
  ASSERT_TRUE(r.avg_gap.has_value());
  EXPECT_DOUBLE_EQ(*r.avg_gap, 1.75);
}

TEST(ThresholdAttack, SeparableLosses) {
  const std::vector<double> m{0.1, 0.2, 0.3}, n{1, 2, 3};
  const auto a = fit_threshold_attack(m, n);
  EXPECT_DOUBLE_EQ(a.threshold, 0.3);
  EXPECT_DOUBLE_EQ(a.balanced_accuracy, 1.0);
  const std::vector<double> targets{0.05, 0.3, 0.31, 5};
  EXPECT_DOUBLE_EQ(mia_from_losses(m, n, targets), 50.0);
}

TEST(ThresholdAttack, TiesPickTheLargestThreshold) {
  const std::vector<double> m{1, 3}, n{2, 4};
  const auto a = fit_threshold_attack(m, n);
  EXPECT_DOUBLE_EQ(a.threshold, 3.0);
  EXPECT_DOUBLE_EQ(a.balanced_accuracy, 0.75);
  const std::vector<double> same{1};
  EXPECT_DOUBLE_EQ(fit_threshold_attack(same, same).threshold, 1.0);
  const std::vector<double> hi{5, 6}, lo{1, 2};
  EXPECT_DOUBLE_EQ(fit_threshold_attack(hi, lo).threshold, 6.0);
}

TEST(ThresholdAttack, LossAtTheThresholdCountsAsMember) {
  const std::vector<double> m{1, 1}, n{2};
  const std::vector<double> at{1.0}, above{1.0000001};
  EXPECT_DOUBLE_EQ(mia_from_losses(m, n, at), 0.0);
  EXPECT_DOUBLE_EQ(mia_from_losses(m, n, above), 100.0);
}

TEST(ThresholdAttack, EmptyInputsAreUsageErrors) {
  const std::vector<double> x{1}, none{};
  EXPECT_THROW(fit_threshold_attack(none, x), UsageError);
  EXPECT_THROW(fit_threshold_attack(x, none), UsageError);
  EXPECT_THROW(mia_from_losses(x, x, none), UsageError);
}

TEST(ThresholdAttack, MemberSampleSize) {
  ForgetSplit s;
  s.num_samples = 30;
  s.retain_indices = iota_indices(25);
  const auto a = mia_member_sample(s, 10, 1);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(a, mia_member_sample(s, 10, 1));
  EXPECT_EQ(mia_member_sample(s, 100, 1).size(), 25u);
}

namespace {

struct Trained {
  DatasetPair data = small_synthetic(3, 20, 5);
  ForgetSplit split = make_forget_split(data.train, SplitSpec{SplitMode::random, 0.25, 0, 2});
  Classifier model = build_classifier<float>(narrow_small_cnn(3), 6);
};

}  // namespace

TEST(Metrics, AccuracyAgreesWithPerSampleLogits) {
  const Trained t;
  const auto logits = t.model.infer(t.data.test.batch(iota_indices(t.data.test.size()))).logits;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < t.data.test.size(); ++i) {
    const auto row = logits.row(i);
    correct += (std::max_element(row.begin(), row.end()) - row.begin()) == t.data.test.label(i);
  }
  EXPECT_NEAR(accuracy_pct(t.model, t.data.test),
              100.0 * static_cast<double>(correct) / static_cast<double>(t.data.test.size()), 1e-9);
  EXPECT_THROW(accuracy_pct(t.model, t.data.test, {}), UsageError);
}

TEST(Metrics, EvaluateAllMatchesTheIndividualMetrics) {
  const Trained t;
  const auto r = evaluate_all(t.model, t.data.train, t.split, t.data.test, 12.5, "original");
  EXPECT_EQ(r.method, "original");
  EXPECT_DOUBLE_EQ(r.rte_seconds, 12.5);
  EXPECT_NEAR(r.ua, ua(t.model, t.data.train, t.split.forget_indices), 1e-9);
  EXPECT_NEAR(r.ra, accuracy_pct(t.model, t.data.train, t.split.retain_indices), 1e-9);
  EXPECT_NEAR(r.ta, accuracy_pct(t.model, t.data.test), 1e-9);
  const auto members = mia_member_sample(t.split, t.data.test.size(), 0);
  EXPECT_NEAR(r.mia, mia_efficacy(t.model, t.data.train, members, t.data.test,
                                  t.split.forget_indices),
              1e-9);
  EXPECT_FALSE(r.gaps.has_value());

  const auto again = evaluate_all(t.model, t.data.train, t.split, t.data.test, 12.5, "original");
  EXPECT_EQ(r, again);
  const auto self = evaluate_all(t.model, t.data.train, t.split, t.data.test, 1.0, "x", &r);
  EXPECT_DOUBLE_EQ(*self.avg_gap, 0.0);
}

TEST(Metrics, SplitFromAnotherDatasetIsAConfigError) {
  const Trained t;
  auto split = t.split;
  split.num_samples += 1;
  EXPECT_THROW(evaluate_all(t.model, t.data.train, split, t.data.test, 0, "m"), ConfigError);
}

TEST(Metrics, CrossSimilarityIsTheMeanPairwiseCosine) {
  const Trained t;
  const std::vector<std::size_t> a{0, 1, 2}, b{10, 11};
  const auto f = t.model.infer(t.data.train.batch(iota_indices(12))).features;
  double expected = 0.0;
  for (const auto i : a) {
    for (const auto j : b) {
      double dot = 0.0;
      for (std::size_t k = 0; k < f.dim(1); ++k) dot += f.row(i)[k] * f.row(j)[k];
      expected += dot / 6.0;
    }
  }
  EXPECT_NEAR(mean_cross_similarity(t.model, t.data.train, a, b), expected, 1e-6);
}

TEST(Report, JsonRoundTrip) {
  TempDir dir("report");
  MetricsReport r;
  r.method = "wss-cl";
  r.dataset = "cifar10";
  r.split = SplitSpec{SplitMode::class_wise, 0.0, 7, 42};
  r.ua = 12.345678901234567;
  r.ra = 99.5;
  r.ta = 91.25;
  r.mia = 0.0;
  r.rte_seconds = 61.7;
  MetricsReport ref = r;
  ref.ua = 10.0;
  r.attach_reference(ref);
  write_report(dir / "r.json", r);
  EXPECT_EQ(read_report(dir / "r.json"), r);
  EXPECT_EQ(MetricsReport::from_json(r.to_json()).to_json(), r.to_json());
}

TEST(Report, MalformedInputIsAnInputError) {
  EXPECT_THROW(MetricsReport::from_json("not json"), InputError);
  EXPECT_THROW(MetricsReport::from_json("{}"), InputError);
  MetricsReport r;
  r.method = "m";
  r.dataset = "d";
  auto text = r.to_json();
  const auto pos = text.find("\"ua\": 0.0");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 9, "\"ua\": 101.0");
  EXPECT_THROW(MetricsReport::from_json(text), InputError);
  EXPECT_THROW(read_report("/nonexistent/report.json"), InputError);
}

TEST(Format, MinutesSecondsAndPercent) {
  EXPECT_EQ(format_mmss(0), "0:00");
  EXPECT_EQ(format_mmss(59.4), "0:59");
  EXPECT_EQ(format_mmss(59.6), "1:00");
  EXPECT_EQ(format_mmss(754), "12:34");
  EXPECT_EQ(format_mmss(3600), "60:00");
  EXPECT_EQ(format_pct(3.7725), "3.77");
  EXPECT_EQ(format_pct(100), "100.00");
  EXPECT_EQ(format_pct(1.545), "1.54");
}
