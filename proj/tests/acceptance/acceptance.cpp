// Acceptance run: one PASS/FAIL/SKIP line per criterion on stdout, progress
// on stderr. Exits 0 once every criterion has been evaluated; --strict turns
// any FAIL into exit code 1.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "experiment.hpp"
#include "unlearn/checkpoint.hpp"
#include "unlearn/losses.hpp"
#include "unlearn/saliency.hpp"

namespace fs = std::filesystem;
using namespace unlearn;
using namespace unlearn::tools;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Accumulates named checks; the first failure is reported.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && first_failure_.empty()) first_failure_ = what;
  }
  bool ok() const { return first_failure_.empty(); }
  const std::string& failure() const { return first_failure_; }

 private:
  std::string first_failure_;
};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

Outcome finish(const Checks& c, const std::string& summary, double seconds, double limit) {
  const bool in_time = seconds < limit;
  std::string detail = summary + ", " + fixed(seconds, 2) + " s";
  if (!c.ok()) return {Status::fail, detail + "; failed: " + c.failure()};
  if (!in_time) return {Status::fail, detail + "; over the " + fixed(limit, 0) + " s budget"};
  return {Status::pass, detail};
}

void log(const std::string& line) { std::cerr << "  " << line << std::endl; }

// ---------------------------------------------------------------------------

Outcome avg_gap_oracle() {
  const Clock clock;
  const double ft = avg_gap(MetricGaps{4.77, 0.12, 0.02, 10.18});
  const double wss = avg_gap(MetricGaps{0.89, 0.61, 0.76, 3.92});
  const double t = clock.seconds();
  Checks c;
  c.expect(std::abs(ft - 3.78) <= 0.005, "FT gaps give " + fixed(ft, 4) + ", want 3.78 +- 0.005");
  c.expect(std::abs(wss - 1.54) <= 0.005, "WSS-CL gaps give " + fixed(wss, 4) + ", want 1.54 +- 0.005");
  return finish(c, "FT " + fixed(ft, 4) + ", WSS-CL " + fixed(wss, 4), t, 1.0);
}

double entropy(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (const double v : row) z += std::exp(v - m);
  double h = 0.0;
  for (const double v : row) {
    const double p = std::exp(v - m) / z;
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

Outcome loss_suite() {
  const Clock clock;
  Checks c;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> kd(2, 12), bd(1, 8);
  std::normal_distribution<double> nd(0.0, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = static_cast<std::size_t>(kd(rng)), b = static_cast<std::size_t>(bd(rng));
    Tensor<double> z({b, k});
    for (auto& v : z.values()) v = nd(rng);
    double h = 0.0;
    for (std::size_t i = 0; i < b; ++i) h += entropy(z.row(i));
    const double expected = std::log(static_cast<double>(k)) - h / static_cast<double>(b);
    worst = std::max(worst, std::abs(kl_uniform_loss(z).value - expected));
  }
  c.expect(worst <= 1e-6, "KL vs ln K - entropy differs by " + std::to_string(worst));

  const Tensor<double> two({1, 2}, {std::log(3.0), 0.0});
  const double kl = kl_uniform_loss(two).value;
  c.expect(std::abs(kl - (0.75 * std::log(1.5) + 0.25 * std::log(0.5))) <= 1e-4, "KL worked example");
  const std::vector<int> label0{0};
  const double ce = retain_ce_loss(two, std::span<const int>(label0)).value;
  c.expect(std::abs(ce - 0.2877) <= 1e-4, "CE worked example gives " + fixed(ce, 6));
  const Tensor<double> e1({1, 2}, {1.0, 0.0}), e2({1, 2}, {0.0, 1.0});
  const double con = contrastive_forget_loss(e1, e1, e2, 1.4).value;
  c.expect(std::abs(con - 0.3985) <= 1e-4, "contrastive worked example gives " + fixed(con, 6));
  return finish(c,
                "max |KL - (ln K - H)| " + fixed(worst, 10) + ", KL " + fixed(kl, 5) + ", contrastive " +
                    fixed(con, 4) + ", CE " + fixed(ce, 4),
                clock.seconds(), 5.0);
}

ParamGrads<float> random_grads(const ParamTable<float>& like, std::uint64_t seed) {
  ParamGrads<float> g = like;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  for (auto& e : g) {
    for (auto& v : e.value.values()) v = nd(rng);
  }
  return g;
}

bool identical(const ParamTable<float>& a, const ParamTable<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() ||
        std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

// Value equality; -0 and +0 compare equal.
bool equal_values(const ParamTable<float>& a, const ParamTable<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::equal(a[i].values().begin(), a[i].values().end(), b[i].values().begin(), b[i].values().end())) {
      return false;
    }
  }
  return true;
}

ArchitectureSpec tiny_small_cnn(int k) {
  auto s = ArchitectureSpec::small_cnn(k);
  s.base_width = 1;
  s.feature_dim = 6;
  return s;
}

Outcome saliency_suite() {
  const Clock clock;
  Checks c;
  c.expect(soft_saliency(0.0) == 0.0, "s(0) = 0");
  const double s1 = 2.0 / (1.0 + std::exp(-1.0)) - 1.0;
  c.expect(std::abs(soft_saliency(1.0) - s1) <= 1e-6, "s(1) = 2 sigmoid(1) - 1");

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 4.0);
  std::vector<double> g(1000);
  for (auto& v : g) v = nd(rng);
  for (const double v : g) c.expect(soft_saliency(v) == soft_saliency(-v), "evenness");
  std::sort(g.begin(), g.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  for (std::size_t i = 1; i < g.size(); ++i) {
    c.expect(soft_saliency(g[i - 1]) <= soft_saliency(g[i]), "monotone in |g|");
  }

  const auto model = build_classifier<float>(tiny_small_cnn(3), 1);
  const auto grads = random_grads(model.params(), 5);
  const double total = static_cast<double>(grads.total_elements());
  for (const double q : {0.05, 0.1, 0.25, 0.5, 0.9, 1.0}) {
    const auto m = hard_mask_from_gradients(grads, q);
    double ones = 0.0;
    for (const auto& e : m.values) ones += std::count(e.value.values().begin(), e.value.values().end(), 1.0f);
    c.expect(std::abs(ones / total - q) <= 1.0 / total, "hard mask sparsity at q=" + fixed(q, 2));
  }

  const auto ones = SaliencyMask::ones_like(model.params());
  c.expect(identical(apply_mask(grads, ones), grads), "all-ones mask is the identity");
  SaliencyMask zeros = ones;
  for (auto& e : zeros.values) std::fill(e.value.values().begin(), e.value.values().end(), 0.0f);
  const auto annihilated = apply_mask(grads, zeros);
  bool all_zero = true;
  for (const auto& e : annihilated) {
    for (const float v : e.value.values()) all_zero = all_zero && v == 0.0f;
  }
  c.expect(all_zero, "all-zeros mask annihilates");

  // Linearity: M (a g1 + b g2) = a M g1 + b M g2, exact for 0/1 masks.
  const auto g2 = random_grads(model.params(), 6);
  const auto hard = hard_mask_from_gradients(g2, 0.3);
  const float a = 1.7f, b = -0.3f;
  auto combine = [&](const ParamGrads<float>& x, const ParamGrads<float>& y) {
    ParamGrads<float> out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = 0; j < out[i].size(); ++j) out[i][j] = a * x[i][j] + b * y[i][j];
    }
    return out;
  };
  c.expect(equal_values(apply_mask(combine(grads, g2), hard),
                     combine(apply_mask(grads, hard), apply_mask(g2, hard))),
           "mask application is linear");
  return finish(c, "1000 random points, 6 sparsities on " + std::to_string(grads.total_elements()) + " params",
                clock.seconds(), 5.0);
}

// Central differences through a double-precision small-cnn of < 1000 params.
using DModel = BasicClassifier<double>;
using LossFn = std::function<double(DModel&, Objective<double>*)>;

double worst_relative_error(const DModel& model, const Tensor<double>& x, const LossFn& loss,
                            std::size_t wanted, std::uint64_t seed, std::size_t* checked) {
  constexpr double h = 1e-4;
  DModel work = model;
  Objective<double> obj;
  loss(work, &obj);
  const auto analytic = work.backward(obj);
  const auto pattern = model.activation_pattern(x);
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    for (std::size_t j = 0; j < model.params()[i].size(); ++j) coords.emplace_back(i, j);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  double worst = 0.0;
  *checked = 0;
  for (const auto& [i, j] : coords) {
    if (*checked == wanted) break;
    DModel plus = model, minus = model;
    plus.mutable_params()[i][j] += h;
    minus.mutable_params()[i][j] -= h;
    // Stencils straddling a ReLU or max-pool switch are not differentiable.
    if (plus.activation_pattern(x) != pattern || minus.activation_pattern(x) != pattern) continue;
    const double fd = (loss(plus, nullptr) - loss(minus, nullptr)) / (2.0 * h);
    const double an = analytic[i][j];
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
    ++*checked;
  }
  return worst;
}

Tensor<double> random_images(std::size_t n, std::uint64_t seed) {
  Tensor<double> t({n, kImageChannels, kImageSide, kImageSide});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto& v : t.values()) v = nd(rng);
  return t;
}

Outcome gradient_checks() {
  const Clock clock;
  Checks c;
  auto model = build_classifier<double>(tiny_small_cnn(3), 11);
  model.set_mode(Mode::eval);
  const std::size_t params = model.params().total_elements();
  c.expect(params <= 1000, "model has " + std::to_string(params) + " parameters");

  const auto x = random_images(7, 21);
  const std::vector<int> labels{0, 2, 1, 1, 0, 2, 0};
  const LossFn kl = [&x](DModel& m, Objective<double>* obj) {
    const auto f = m.forward(x, obj != nullptr);
    auto l = kl_uniform_loss(f.logits);
    if (obj) *obj = Objective<double>::on_logits(f, l.value, l.grad);
    return l.value;
  };
  const LossFn ce = [&x, &labels](DModel& m, Objective<double>* obj) {
    const auto f = m.forward(x, obj != nullptr);
    auto l = retain_ce_loss(f.logits, std::span<const int>(labels));
    if (obj) *obj = Objective<double>::on_logits(f, l.value, l.grad);
    return l.value;
  };
  // Rows 0-1 anchors, 2-3 positives, 4-6 negatives.
  const LossFn con = [&x](DModel& m, Objective<double>* obj) {
    const auto f = m.forward(x, obj != nullptr);
    const std::size_t d = f.features.dim(1);
    auto rows = [&](std::size_t from, std::size_t n) {
      Tensor<double> t({n, d});
      std::copy_n(f.features.row(from).begin(), n * d, t.data());
      return t;
    };
    const auto r = contrastive_forget_loss(rows(0, 2), rows(2, 2), rows(4, 3), 1.4);
    if (obj) {
      Tensor<double> df(f.features.shape());
      std::copy(r.d_anchors.values().begin(), r.d_anchors.values().end(), df.data());
      std::copy(r.d_positives.values().begin(), r.d_positives.values().end(), df.data() + 2 * d);
      std::copy(r.d_negatives.values().begin(), r.d_negatives.values().end(), df.data() + 4 * d);
      *obj = Objective<double>::on_features(f, r.value, std::move(df));
    }
    return r.value;
  };

  std::string summary;
  std::uint64_t seed = 1;
  for (const auto& [name, fn] : std::vector<std::pair<std::string, LossFn>>{
           {"KL", kl}, {"contrastive", con}, {"CE", ce}}) {
    std::size_t checked = 0;
    const double worst = worst_relative_error(model, x, fn, 40, seed++, &checked);
    c.expect(checked == 40, name + ": only " + std::to_string(checked) + " smooth coordinates");
    c.expect(worst < 1e-3, name + " relative error " + fixed(worst, 8));
    summary += (summary.empty() ? "" : ", ") + name + " " + fixed(worst, 8);
  }
  return finish(c, std::to_string(params) + " params, worst rel. error " + summary, clock.seconds(), 60.0);
}

// ---------------------------------------------------------------------------
// Behavioural criteria share one synthetic CIFAR-10-format data directory.

struct Context {
  fs::path work;
  KeyValues toy;
  ExperimentConfig toy_config;
};

ExperimentConfig config_for(const Context& ctx, const fs::path& output) {
  auto cfg = ctx.toy_config;
  cfg.output_dir = output;
  return cfg;
}

Outcome pipeline_equivalence(const Context& ctx) {
  const Clock clock;
  auto cfg = config_for(ctx, ctx.work / "equivalence");
  cfg.dataset = DatasetChoice{DatasetChoice::Kind::toy_subset, 2000};
  const auto data = load_dataset(cfg);
  const auto split = make_forget_split(data.train, SplitSpec{SplitMode::random, 0.1, 0, 5});
  TrainConfig tc = cfg.train;
  tc.epochs = 1;
  std::vector<std::size_t> all(data.train.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto original = train_classifier(cfg.architecture_spec(10), data.train, all, tc);
  UnlearnConfig ucfg = cfg.unlearn;
  ucfg.phase1_epochs = 1;
  ucfg.phase2_epochs = 1;
  ucfg.mask_mode = MaskMode::none;
  const auto plain = wss_cl_unlearn(original, data.train, split, ucfg);
  const auto ones = SaliencyMask::ones_like(original.params());
  const auto masked = wss_cl_unlearn(original, data.train, split, ucfg, &ones);
  Checks c;
  c.expect(identical(plain.model.params(), masked.model.params()), "final parameters differ");
  c.expect(identical(plain.model.buffers(), masked.model.buffers()), "final buffers differ");
  c.expect(!identical(plain.model.params(), original.params()), "unlearning changed nothing");
  return finish(c, "toy-subset(2000), " + std::to_string(original.params().total_elements()) +
                       " params bit-identical",
                clock.seconds(), 300.0);
}

double mean_forget_ce(const Classifier& m, const LabeledDataset& train, const ForgetSplit& s) {
  const auto l = sample_losses(m, train, s.forget_indices);
  double sum = 0.0;
  for (const double v : l) sum += v;
  return sum / static_cast<double>(l.size());
}

std::vector<std::size_t> head(const std::vector<std::size_t>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size()))};
}

struct ToyRun {
  MetricsReport original, retrain, wss, ga;
  double sim_before = 0.0, sim_after = 0.0;
  double ce_original = 0.0, ce_ga = 0.0;
  double seconds = 0.0;
};

ToyRun run_toy(const Context& ctx, const fs::path& output) {
  const Clock clock;
  fs::remove_all(output);
  Experiment exp(config_for(ctx, output), log);
  ToyRun r;
  exp.original();
  r.original = exp.evaluate("original");
  r.retrain = exp.run(Method::retrain).report;

  const auto& train = exp.data().train;
  const auto& split = exp.split();
  const auto fs_sample = head(split.forget_indices, 200), rs_sample = head(split.retain_indices, 200);
  PhaseHooks hooks;
  hooks.on_phase_start = [&](const std::string& phase, const Classifier& m) {
    if (phase == "adversarial") r.sim_before = mean_cross_similarity(m, train, fs_sample, rs_sample);
  };
  hooks.on_phase_end = [&](const std::string& phase, const Classifier& m) {
    if (phase == "adversarial") r.sim_after = mean_cross_similarity(m, train, fs_sample, rs_sample);
  };
  r.wss = exp.run(Method::wss_cl, hooks).report;

  const auto ga = exp.run(Method::ga);
  r.ga = ga.report;
  r.ce_original = mean_forget_ce(exp.original(), train, split);
  r.ce_ga = mean_forget_ce(ga.model, train, split);
  r.seconds = clock.seconds();
  return r;
}

Outcome toy_benchmark(Context& ctx, std::optional<ToyRun>& first) {
  first = run_toy(ctx, ctx.work / "toy-run-1");
  const auto& r = *first;
  Checks c;
  c.expect(r.wss.ua > r.original.ua + 1.0,
           "(a) UA " + fixed(r.wss.ua, 2) + " vs original " + fixed(r.original.ua, 2));
  c.expect(std::abs(r.wss.ua - r.retrain.ua) < std::abs(r.original.ua - r.retrain.ua),
           "(b) UA not closer to retrain " + fixed(r.retrain.ua, 2));
  c.expect(r.wss.ra >= r.original.ra - 5.0,
           "(c) RA " + fixed(r.wss.ra, 2) + " vs original " + fixed(r.original.ra, 2));
  c.expect(r.sim_after < r.sim_before,
           "(d) similarity " + fixed(r.sim_before, 4) + " -> " + fixed(r.sim_after, 4));
  c.expect(r.ce_ga > r.ce_original,
           "(e) GA forget CE " + fixed(r.ce_original, 4) + " -> " + fixed(r.ce_ga, 4));
  std::ostringstream s;
  s << "UA orig/retrain/wss-cl " << fixed(r.original.ua, 2) << "/" << fixed(r.retrain.ua, 2) << "/"
    << fixed(r.wss.ua, 2) << ", RA " << fixed(r.original.ra, 2) << " -> " << fixed(r.wss.ra, 2)
    << ", sim " << fixed(r.sim_before, 4) << " -> " << fixed(r.sim_after, 4) << ", GA CE "
    << fixed(r.ce_original, 4) << " -> " << fixed(r.ce_ga, 4);
  return finish(c, s.str(), r.seconds, 1800.0);
}

Outcome determinism(Context& ctx, const std::optional<ToyRun>& first) {
  const Clock clock;
  const ToyRun a = first ? *first : run_toy(ctx, ctx.work / "toy-run-1");
  const ToyRun b = run_toy(ctx, ctx.work / "toy-run-2");
  Checks c;
  auto same = [&](MetricsReport x, MetricsReport y, const std::string& name) {
    x.rte_seconds = 0;
    y.rte_seconds = 0;
    c.expect(x == y, name + " reports differ");
  };
  same(a.original, b.original, "original");
  same(a.retrain, b.retrain, "retrain");
  same(a.wss, b.wss, "wss-cl");
  same(a.ga, b.ga, "ga");
  return finish(c, "4 reports identical apart from RTE", clock.seconds(), 1e9);
}

bool partition_ok(const ForgetSplit& s, std::size_t expected_forget) {
  if (s.forget_indices.size() != expected_forget) return false;
  if (s.forget_indices.size() + s.retain_indices.size() != s.num_samples) return false;
  std::vector<char> seen(s.num_samples, 0);
  for (const auto* v : {&s.forget_indices, &s.retain_indices}) {
    for (const auto i : *v) {
      if (i >= s.num_samples || seen[i]) return false;
      seen[i] = 1;
    }
  }
  return true;
}

Outcome data_fidelity(const Context& ctx) {
  const Clock clock;
  Checks c;
  c.expect(decode_cifar_bytes(std::vector<std::uint8_t>(30'730'000, 0), CifarLayout::cifar10, "b").labels.size() ==
               10'000,
           "30,730,000 bytes -> 10,000 records");
  c.expect(decode_cifar_bytes(std::vector<std::uint8_t>(153'700'000, 0), CifarLayout::cifar100, "t").labels.size() ==
               50'000,
           "153,700,000 bytes -> 50,000 records");
  std::vector<std::uint8_t> rec(kCifar10RecordBytes, 0);
  rec[0] = 0x07;
  c.expect(decode_cifar_bytes(rec, CifarLayout::cifar10, "r").labels.at(0) == 7, "label byte 0x07");
  std::vector<std::uint8_t> rec100(kCifar100RecordBytes, 0);
  rec100[1] = 0x63;
  c.expect(decode_cifar_bytes(rec100, CifarLayout::cifar100, "r").labels.at(0) == 99, "fine label 0x63");
  try {
    decode_cifar_bytes(std::vector<std::uint8_t>(3074, 0), CifarLayout::cifar10, "data_batch_2.bin");
    c.expect(false, "bad size accepted");
  } catch (const InputError& e) {
    c.expect(std::string(e.what()).find("data_batch_2.bin") != std::string::npos, "error names the file");
  }

  // Official files when available, otherwise the CIFAR-10-layout stand-in.
  std::string source = "stand-in files";
  fs::path dir = resolve_data_dir(ctx.toy_config);
  if (const char* env = std::getenv("UNLEARN_DATA_DIR"); env != nullptr && has_cifar10(env)) {
    dir = env;
    source = "official files";
  }
  const auto d = load_cifar10(dir);
  c.expect(d.train.size() == 50'000 && d.test.size() == 10'000, "CIFAR-10 sizes");
  for (const auto n : d.train.class_counts()) c.expect(n == 5000, "CIFAR-10 class count");
  {
    std::ifstream in(dir / "cifar-10-batches-bin" / "data_batch_3.bin", std::ios::binary);
    std::vector<std::uint8_t> src(kCifar10RecordBytes * 50);
    in.read(reinterpret_cast<char*>(src.data()), static_cast<std::streamsize>(src.size()));
    std::vector<std::uint8_t> re;
    for (std::size_t i = 20'000; i < 20'050; ++i) {
      const auto r = encode_cifar_record(d.train.image(i), d.train.label(i), CifarLayout::cifar10);
      re.insert(re.end(), r.begin(), r.end());
    }
    c.expect(in.good() && re == src, "re-encoded records reproduce the file bytes");
  }
  std::string cifar100 = "CIFAR-100 counts not checked (files absent)";
  if (const char* env = std::getenv("UNLEARN_DATA_DIR"); env != nullptr && has_cifar100(env)) {
    const auto e = load_cifar100(env);
    c.expect(e.train.size() == 50'000 && e.test.size() == 10'000, "CIFAR-100 sizes");
    for (const auto n : e.train.class_counts()) c.expect(n == 500, "CIFAR-100 class count");
    cifar100 = "CIFAR-100 counts checked";
  }

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 9), coin(0, 1);
  std::uniform_int_distribution<std::int64_t> seed(0, 1LL << 40);
  const auto counts = d.train.class_counts();
  for (int draw = 0; draw < 50; ++draw) {
    SplitSpec spec;
    spec.seed = seed(rng);
    std::size_t expected = 0;
    if (coin(rng)) {
      spec.fraction = frac(rng);
      expected = static_cast<std::size_t>(std::llround(spec.fraction * 50'000.0));
    } else {
      spec.mode = SplitMode::class_wise;
      spec.target_class = cls(rng);
      expected = counts[static_cast<std::size_t>(spec.target_class)];
    }
    c.expect(partition_ok(make_forget_split(d.train, spec), expected), "partition draw " + std::to_string(draw));
  }
  return finish(c, "CIFAR-10 loader on " + source + ", " + cifar100 + ", 50 partition draws",
                clock.seconds(), 120.0);
}

const char* label(Status s) {
  switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::skip: return "SKIP";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  std::string work = "acceptance-work";
  std::string config = UNLEARN_ACCEPTANCE_CONFIG;
  std::set<int> only;
  bool strict = false;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--config", config, "toy benchmark config");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_flag("--strict", strict, "exit 1 if any criterion fails");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.work = fs::absolute(work);
  try {
    fs::create_directories(ctx.work);
    ctx.toy = KeyValues::load(config);
    ctx.toy.set("data.dir", (ctx.work / "data").string());
    ctx.toy.set("output_dir", (ctx.work / "unused").string());
    ctx.toy_config = ExperimentConfig::from(ctx.toy);
    // Writes the synthetic files once; later loads reuse them.
    if (ctx.toy_config.synthetic && !has_cifar10(ctx.work / "data")) {
      std::cerr << "writing synthetic CIFAR-10-format data to " << (ctx.work / "data").string() << std::endl;
      write_synthetic_cifar10(ctx.work / "data" / "cifar-10-batches-bin", ctx.toy_config.synthetic_options);
    }
  } catch (const std::exception& e) {
    std::cerr << "setup failed: " << e.what() << "\n";
    return 2;
  }

  std::optional<ToyRun> first;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Avg-Gap oracle", avg_gap_oracle},
      {"loss unit suite", loss_suite},
      {"saliency suite", saliency_suite},
      {"gradient checks", gradient_checks},
      {"pipeline equivalence", [&] { return pipeline_equivalence(ctx); }},
      {"toy behavioural benchmark", [&] { return toy_benchmark(ctx, first); }},
      {"determinism", [&] { return determinism(ctx, first); }},
      {"data fidelity", [&] { return data_fidelity(ctx); }},
      {"full-scale run", [] {
         return Outcome{Status::skip, "non-gating; needs a GPU, ResNet-18 and the official CIFAR-10 files"};
       }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && only.count(n) == 0) continue;
    std::cerr << "criterion " << n << ": " << criteria[i].first << std::endl;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    failures += o.status == Status::fail;
    std::cout << "criterion " << n << " " << label(o.status) << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return strict && failures > 0 ? 1 : 0;
}
