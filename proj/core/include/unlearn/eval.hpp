#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unlearn/data.hpp"
#include "unlearn/model.hpp"

namespace unlearn {

// Per-sample cross-entropy in eval mode, in index order.
std::vector<double> sample_losses(const Classifier& model, const LabeledDataset& data,
                                  std::span<const std::size_t> indices);

// 100 * top-1 accuracy; argmax ties go to the lowest class index.
// Throws UsageError on an empty selection.
double accuracy_pct(const Classifier& model, const LabeledDataset& data,
                    std::span<const std::size_t> indices);
double accuracy_pct(const Classifier& model, const LabeledDataset& data);

// 100 - accuracy on the forget set.
double ua(const Classifier& model, const LabeledDataset& train,
          std::span<const std::size_t> forget);

// Loss threshold t: loss <= t is judged "member". t maximises the balanced
// accuracy on the calibration sets; among equally good thresholds the
// largest wins. Candidates are -inf and every calibration loss.
struct ThresholdAttack {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

ThresholdAttack fit_threshold_attack(std::span<const double> member_losses,
                                     std::span<const double> nonmember_losses);

// 100 * fraction of target losses strictly above the fitted threshold.
double mia_from_losses(std::span<const double> member_losses,
                       std::span<const double> nonmember_losses,
                       std::span<const double> target_losses);

// Threshold attack calibrated on retain_sample (members) vs the full test set
// (non-members) and applied to the forget set.
double mia_efficacy(const Classifier& model, const LabeledDataset& train,
                    std::span<const std::size_t> retain_sample, const LabeledDataset& test,
                    std::span<const std::size_t> forget);

// Seeded subsample of the retain set of size min(|test|, 10000, |D_r|),
// returned ascending.
std::vector<std::size_t> mia_member_sample(const ForgetSplit& split, std::size_t test_size,
                                           std::uint64_t seed);

struct MetricGaps {
  double ua = 0.0;
  double ra = 0.0;
  double ta = 0.0;
  double mia = 0.0;
};

struct MetricsReport {
  std::string method;
  std::string dataset;
  SplitSpec split;
  double ua = 0.0;
  double ra = 0.0;
  double ta = 0.0;
  double mia = 0.0;
  double rte_seconds = 0.0;
  std::optional<MetricGaps> gaps;
  std::optional<double> avg_gap;

  // Fills gaps and avg_gap against `reference`.
  void attach_reference(const MetricsReport& reference);

  std::string to_json() const;  // pretty-printed, fixed field order
  static MetricsReport from_json(const std::string& text);

  friend bool operator==(const MetricsReport&, const MetricsReport&);
};

double avg_gap(const MetricGaps& gaps);
MetricGaps metric_gaps(const MetricsReport& report, const MetricsReport& reference);
double avg_gap(const MetricsReport& report, const MetricsReport& reference);

MetricsReport evaluate_all(const Classifier& model, const LabeledDataset& train,
                           const ForgetSplit& split, const LabeledDataset& test,
                           double rte_seconds, const std::string& method,
                           const MetricsReport* reference = nullptr,
                           std::uint64_t mia_seed = 0);

void write_report(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report(const std::filesystem::path& path);

// Mean cosine similarity over all pairs (a, b) of eval-mode embeddings.
double mean_cross_similarity(const Classifier& model, const LabeledDataset& data,
                             std::span<const std::size_t> a, std::span<const std::size_t> b);

// "m:ss", seconds rounded to the nearest whole second.
std::string format_mmss(double seconds);
// Two-decimal fixed notation.
std::string format_pct(double value);

}  // namespace unlearn
