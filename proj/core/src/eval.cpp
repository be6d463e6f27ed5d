#include "unlearn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unlearn/losses.hpp"
#include "unlearn/random.hpp"

namespace unlearn {

namespace {

constexpr std::size_t kEvalChunk = 500;
constexpr std::size_t kMaxMembers = 10000;
constexpr std::uint64_t kTagMembers = 0x7501;

template <typename Fn>
void for_each_chunk(std::span<const std::size_t> indices, Fn&& fn) {
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    fn(indices.subspan(start, std::min(kEvalChunk, indices.size() - start)));
  }
}

std::vector<std::size_t> all_indices(const LabeledDataset& data) {
  std::vector<std::size_t> out(data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

// Per-sample CE and top-1 correctness from one eval-mode pass.
struct Scores {
  std::vector<double> losses;
  std::vector<char> correct;

  double accuracy_pct() const {
    const auto n = std::count(correct.begin(), correct.end(), 1);
    return 100.0 * static_cast<double>(n) / static_cast<double>(correct.size());
  }
};

Scores score(const Classifier& model, const LabeledDataset& data,
             std::span<const std::size_t> indices) {
  Scores out;
  out.losses.reserve(indices.size());
  out.correct.reserve(indices.size());
  for_each_chunk(indices, [&](std::span<const std::size_t> chunk) {
    const auto logits = model.infer(data.batch(chunk)).logits;
    const auto labels = data.batch_labels(chunk);
    const auto losses = per_sample_ce(logits, labels);
    out.losses.insert(out.losses.end(), losses.begin(), losses.end());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto row = logits.row(i);
      // max_element returns the first maximum.
      const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
      out.correct.push_back(pred == labels[i] ? 1 : 0);
    }
  });
  return out;
}

Scores select(const Scores& all, std::span<const std::size_t> indices) {
  Scores out;
  for (const auto i : indices) {
    out.losses.push_back(all.losses.at(i));
    out.correct.push_back(all.correct.at(i));
  }
  return out;
}

void check_pct(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0 || v > 100.0) {
    throw InputError(std::string("report field ") + name + " must be a percentage in [0,100]");
  }
}

}  // namespace

std::vector<double> sample_losses(const Classifier& model, const LabeledDataset& data,
                                  std::span<const std::size_t> indices) {
  return score(model, data, indices).losses;
}

double accuracy_pct(const Classifier& model, const LabeledDataset& data,
                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw UsageError("accuracy of an empty sample set is undefined");
  return score(model, data, indices).accuracy_pct();
}

double accuracy_pct(const Classifier& model, const LabeledDataset& data) {
  const auto idx = all_indices(data);
  return accuracy_pct(model, data, idx);
}

double ua(const Classifier& model, const LabeledDataset& train,
          std::span<const std::size_t> forget) {
  return 100.0 - accuracy_pct(model, train, forget);
}

ThresholdAttack fit_threshold_attack(std::span<const double> member_losses,
                                     std::span<const double> nonmember_losses) {
  if (member_losses.empty() || nonmember_losses.empty()) {
    throw UsageError("threshold attack needs member and non-member samples");
  }
  std::vector<double> m(member_losses.begin(), member_losses.end());
  std::vector<double> n(nonmember_losses.begin(), nonmember_losses.end());
  std::sort(m.begin(), m.end());
  std::sort(n.begin(), n.end());
  std::vector<double> candidates;
  candidates.reserve(m.size() + n.size());
  std::merge(m.begin(), m.end(), n.begin(), n.end(), std::back_inserter(candidates));
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const double nm = static_cast<double>(m.size()), nn = static_cast<double>(n.size());
  // t = -inf: every sample judged non-member.
  ThresholdAttack best{-std::numeric_limits<double>::infinity(), 0.5};
  std::size_t im = 0, in = 0;
  for (const double t : candidates) {
    while (im < m.size() && m[im] <= t) ++im;
    while (in < n.size() && n[in] <= t) ++in;
    const double ba = 0.5 * (static_cast<double>(im) / nm + (nn - static_cast<double>(in)) / nn);
    if (ba >= best.balanced_accuracy) best = {t, ba};
  }
  return best;
}

double mia_from_losses(std::span<const double> member_losses,
                       std::span<const double> nonmember_losses,
                       std::span<const double> target_losses) {
  if (target_losses.empty()) throw UsageError("membership attack target set is empty");
  const auto attack = fit_threshold_attack(member_losses, nonmember_losses);
  const auto above = std::count_if(target_losses.begin(), target_losses.end(),
                                   [&](double l) { return l > attack.threshold; });
  return 100.0 * static_cast<double>(above) / static_cast<double>(target_losses.size());
}

double mia_efficacy(const Classifier& model, const LabeledDataset& train,
                    std::span<const std::size_t> retain_sample, const LabeledDataset& test,
                    std::span<const std::size_t> forget) {
  if (retain_sample.empty() || forget.empty() || test.size() == 0) {
    throw UsageError("membership attack needs non-empty member, non-member and target sets");
  }
  const auto members = sample_losses(model, train, retain_sample);
  const auto test_idx = all_indices(test);
  const auto nonmembers = sample_losses(model, test, test_idx);
  const auto targets = sample_losses(model, train, forget);
  return mia_from_losses(members, nonmembers, targets);
}

std::vector<std::size_t> mia_member_sample(const ForgetSplit& split, std::size_t test_size,
                                           std::uint64_t seed) {
  const std::size_t n = std::min({test_size, kMaxMembers, split.retain_indices.size()});
  std::vector<std::size_t> pool = split.retain_indices;
  std::mt19937_64 rng(derive_seed(seed, {kTagMembers}));
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double avg_gap(const MetricGaps& g) { return (g.ua + g.ra + g.ta + g.mia) / 4.0; }

MetricGaps metric_gaps(const MetricsReport& r, const MetricsReport& ref) {
  return {std::abs(r.ua - ref.ua), std::abs(r.ra - ref.ra), std::abs(r.ta - ref.ta),
          std::abs(r.mia - ref.mia)};
}

double avg_gap(const MetricsReport& report, const MetricsReport& reference) {
  return avg_gap(metric_gaps(report, reference));
}

void MetricsReport::attach_reference(const MetricsReport& reference) {
  gaps = metric_gaps(*this, reference);
  avg_gap = unlearn::avg_gap(*gaps);
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["dataset"] = dataset;
  nlohmann::ordered_json s;
  s["mode"] = to_string(split.mode);
  s["seed"] = split.seed;
  if (split.mode == SplitMode::random) {
    s["fraction"] = split.fraction;
  } else {
    s["class"] = split.target_class;
  }
  j["split"] = s;
  j["ua"] = ua;
  j["ra"] = ra;
  j["ta"] = ta;
  j["mia"] = mia;
  j["rte_seconds"] = rte_seconds;
  if (gaps) {
    j["gaps"] = {{"ua", gaps->ua}, {"ra", gaps->ra}, {"ta", gaps->ta}, {"mia", gaps->mia}};
  }
  if (avg_gap) j["avg_gap"] = *avg_gap;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  MetricsReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    const auto& s = j.at("split");
    r.split.mode = parse_split_mode(s.at("mode").get<std::string>());
    r.split.seed = s.at("seed").get<std::int64_t>();
    if (r.split.mode == SplitMode::random) {
      r.split.fraction = s.at("fraction").get<double>();
    } else {
      r.split.target_class = s.at("class").get<int>();
    }
    r.ua = j.at("ua").get<double>();
    r.ra = j.at("ra").get<double>();
    r.ta = j.at("ta").get<double>();
    r.mia = j.at("mia").get<double>();
    r.rte_seconds = j.at("rte_seconds").get<double>();
    if (j.contains("gaps")) {
      const auto& g = j.at("gaps");
      r.gaps = MetricGaps{g.at("ua").get<double>(), g.at("ra").get<double>(),
                          g.at("ta").get<double>(), g.at("mia").get<double>()};
    }
    if (j.contains("avg_gap")) r.avg_gap = j.at("avg_gap").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed metrics report: ") + e.what());
  }
  check_pct(r.ua, "ua");
  check_pct(r.ra, "ra");
  check_pct(r.ta, "ta");
  check_pct(r.mia, "mia");
  if (!(r.rte_seconds >= 0.0)) throw InputError("report field rte_seconds must be >= 0");
  return r;
}

bool operator==(const MetricsReport& a, const MetricsReport& b) {
  auto same_gaps = [](const std::optional<MetricGaps>& x, const std::optional<MetricGaps>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->ua == y->ua && x->ra == y->ra && x->ta == y->ta && x->mia == y->mia);
  };
  // Only the field that the split mode uses is serialised, so only it is compared.
  const bool same_split =
      a.split.mode == b.split.mode && a.split.seed == b.split.seed &&
      (a.split.mode == SplitMode::random ? a.split.fraction == b.split.fraction
                                         : a.split.target_class == b.split.target_class);
  return a.method == b.method && a.dataset == b.dataset && same_split && a.ua == b.ua && a.ra == b.ra &&
         a.ta == b.ta && a.mia == b.mia && a.rte_seconds == b.rte_seconds &&
         same_gaps(a.gaps, b.gaps) && a.avg_gap == b.avg_gap;
}

MetricsReport evaluate_all(const Classifier& model, const LabeledDataset& train,
                           const ForgetSplit& split, const LabeledDataset& test,
                           double rte_seconds, const std::string& method,
                           const MetricsReport* reference, std::uint64_t mia_seed) {
  if (split.num_samples != train.size()) {
    throw ConfigError("split does not belong to dataset " + train.name());
  }
  if (!(rte_seconds >= 0.0)) throw UsageError("rte_seconds must be >= 0");
  MetricsReport r;
  r.method = method;
  r.dataset = split.dataset;
  r.split = split.spec;
  if (split.forget_indices.empty() || split.retain_indices.empty()) {
    throw UsageError("evaluation needs non-empty forget and retain sets");
  }
  // One pass over each dataset; the attack reuses the same losses.
  const auto train_scores = score(model, train, all_indices(train));
  const auto test_scores = score(model, test, all_indices(test));
  const auto forget = select(train_scores, split.forget_indices);
  r.ua = 100.0 - forget.accuracy_pct();
  r.ra = select(train_scores, split.retain_indices).accuracy_pct();
  r.ta = test_scores.accuracy_pct();
  const auto members = select(train_scores, mia_member_sample(split, test.size(), mia_seed));
  r.mia = mia_from_losses(members.losses, test_scores.losses, forget.losses);
  r.rte_seconds = rte_seconds;
  if (reference != nullptr) r.attach_reference(*reference);
  return r;
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write report " + path.string());
  out << report.to_json();
  if (!out) throw InputError("failed writing report " + path.string());
}

MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return MetricsReport::from_json(ss.str());
}

double mean_cross_similarity(const Classifier& model, const LabeledDataset& data,
                             std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.empty() || b.empty()) throw UsageError("similarity needs two non-empty sets");
  // mean_{i,j} <u_i, v_j> = <mean u, mean v>
  auto mean_embedding = [&](std::span<const std::size_t> idx) {
    std::vector<double> mean;
    for_each_chunk(idx, [&](std::span<const std::size_t> chunk) {
      const auto f = model.infer(data.batch(chunk)).features;
      if (mean.empty()) mean.assign(f.dim(1), 0.0);
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        const auto row = f.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
      }
    });
    for (double& v : mean) v /= static_cast<double>(idx.size());
    return mean;
  };
  const auto ma = mean_embedding(a);
  const auto mb = mean_embedding(b);
  double s = 0.0;
  for (std::size_t j = 0; j < ma.size(); ++j) s += ma[j] * mb[j];
  return s;
}

std::string format_mmss(double seconds) {
  const auto total = static_cast<long long>(std::llround(std::max(seconds, 0.0)));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld:%02lld", total / 60, total % 60);
  return buf;
}

std::string format_pct(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

}  // namespace unlearn
