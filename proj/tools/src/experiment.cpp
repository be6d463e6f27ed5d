#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

#include "unlearn/checkpoint.hpp"
#include "unlearn/saliency.hpp"

namespace fs = std::filesystem;

namespace unlearn::tools {

std::string to_string(Method method) {
  switch (method) {
    case Method::retrain: return "retrain";
    case Method::ft: return "ft";
    case Method::ga: return "ga";
    case Method::rl: return "rl";
    case Method::cl: return "cl";
    case Method::ws_cl: return "ws-cl";
    case Method::wss_cl: return "wss-cl";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (const auto m : {Method::retrain, Method::ft, Method::ga, Method::rl, Method::cl,
                       Method::ws_cl, Method::wss_cl}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + name +
                    "' (expected retrain, ft, ga, rl, cl, ws-cl or wss-cl)");
}

std::optional<MaskMode> mask_mode_for(Method method) {
  switch (method) {
    case Method::cl: return MaskMode::none;
    case Method::ws_cl: return MaskMode::hard;
    case Method::wss_cl: return MaskMode::soft;
    default: return std::nullopt;
  }
}

std::string DatasetChoice::name() const {
  switch (kind) {
    case Kind::cifar10: return "cifar10";
    case Kind::cifar100: return "cifar100";
    case Kind::toy_subset: return "toy-subset(" + std::to_string(toy_size) + ")";
  }
  return "unknown";
}

DatasetChoice DatasetChoice::parse(const std::string& text) {
  if (text == "cifar10") return {Kind::cifar10, 0};
  if (text == "cifar100") return {Kind::cifar100, 0};
  const std::string prefix = "toy-subset(";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size() + 1 && text.back() == ')') {
    const auto digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    std::size_t n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && n > 0) {
      return {Kind::toy_subset, n};
    }
  }
  throw ConfigError("unknown dataset '" + text + "' (expected cifar10, cifar100 or toy-subset(n))");
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "dataset", "architecture", "data.dir", "data.synthetic", "data.synthetic.seed",
      "data.synthetic.noise_stddev", "data.synthetic.label_noise",
      "data.synthetic.train_per_class", "data.synthetic.test_per_class", "toy.seed",
      "split.mode", "split.fraction", "split.class", "split.seed", "method", "output_dir",
      "run_seed", "mia.seed", "train.epochs", "train.lr", "train.momentum",
      "train.weight_decay", "train.batch_size", "train.augment", "train.cosine", "train.seed",
      "train.warmup_steps",
      "unlearn.tau", "unlearn.phase1_epochs", "unlearn.phase2_epochs", "unlearn.phase1_lr",
      "unlearn.phase2_lr", "unlearn.momentum", "unlearn.weight_decay",
      "unlearn.batch_size_forget", "unlearn.batch_size_retain", "unlearn.hard_sparsity",
      "unlearn.alternation_ratio", "unlearn.mask_ce", "unlearn.crop_padding",
      "unlearn.hflip_prob", "unlearn.seed", "ft.epochs", "ft.lr", "ga.epochs", "ga.lr",
      "rl.epochs", "rl.lr"};
  return keys;
}

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string num(std::int64_t v) { return std::to_string(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

int as_int(const KeyValues& kv, const std::string& key, int fallback) {
  const auto v = kv.get_int(key, fallback);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("config key '" + key + "' is out of range");
  }
  return static_cast<int>(v);
}

std::size_t as_size(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

std::uint64_t as_seed(const KeyValues& kv, const std::string& key, std::int64_t fallback) {
  const auto v = kv.get_int(key, fallback);
  if (v < 0) throw ConfigError("config key '" + key + "' must be >= 0");
  return static_cast<std::uint64_t>(v);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const KeyValues& kv, const fs::path& base_dir) {
  kv.require_known(known_keys());
  ExperimentConfig c;
  c.dataset = DatasetChoice::parse(kv.get_string("dataset", "cifar10"));
  c.architecture = parse_architecture(kv.get_string("architecture", "small-cnn"));
  c.data_dir = resolve(base_dir, kv.get_string("data.dir", ""));
  c.synthetic = kv.get_bool("data.synthetic", false);
  auto& so = c.synthetic_options;
  so.seed = as_seed(kv, "data.synthetic.seed", static_cast<std::int64_t>(so.seed));
  so.noise_stddev = kv.get_double("data.synthetic.noise_stddev", so.noise_stddev);
  so.label_noise = kv.get_double("data.synthetic.label_noise", so.label_noise);
  so.train_per_class = as_size(kv, "data.synthetic.train_per_class", so.train_per_class);
  so.test_per_class = as_size(kv, "data.synthetic.test_per_class", so.test_per_class);
  c.toy_seed = as_seed(kv, "toy.seed", 0);

  c.run_seed = kv.get_int("run_seed", 0);
  if (c.run_seed < 0) throw ConfigError("run_seed must be >= 0");
  c.split.mode = parse_split_mode(kv.get_string("split.mode", "random"));
  c.split.fraction = kv.get_double("split.fraction", 0.1);
  c.split.target_class = as_int(kv, "split.class", 0);
  c.split.seed = kv.get_int("split.seed", c.run_seed);
  c.method = parse_method(kv.get_string("method", "wss-cl"));
  c.output_dir = resolve(base_dir, kv.get_string("output_dir", ""));
  c.mia_seed = as_seed(kv, "mia.seed", c.run_seed);

  auto& t = c.train;
  t.epochs = as_int(kv, "train.epochs", t.epochs);
  t.lr = kv.get_double("train.lr", t.lr);
  t.momentum = kv.get_double("train.momentum", t.momentum);
  t.weight_decay = kv.get_double("train.weight_decay", t.weight_decay);
  t.batch_size = as_size(kv, "train.batch_size", t.batch_size);
  t.augment = kv.get_bool("train.augment", t.augment);
  t.cosine_schedule = kv.get_bool("train.cosine", t.cosine_schedule);
  t.warmup_steps = as_size(kv, "train.warmup_steps", t.warmup_steps);
  t.seed = kv.get_int("train.seed", c.run_seed);

  auto& u = c.unlearn;
  u.tau = kv.get_double("unlearn.tau", u.tau);
  u.phase1_epochs = as_int(kv, "unlearn.phase1_epochs", u.phase1_epochs);
  u.phase2_epochs = as_int(kv, "unlearn.phase2_epochs", u.phase2_epochs);
  u.phase1_lr = kv.get_double("unlearn.phase1_lr", u.phase1_lr);
  u.phase2_lr = kv.get_double("unlearn.phase2_lr", u.phase2_lr);
  u.momentum = kv.get_double("unlearn.momentum", u.momentum);
  u.weight_decay = kv.get_double("unlearn.weight_decay", u.weight_decay);
  u.batch_size_forget = as_size(kv, "unlearn.batch_size_forget", u.batch_size_forget);
  u.batch_size_retain = as_size(kv, "unlearn.batch_size_retain", u.batch_size_retain);
  u.hard_sparsity = kv.get_double("unlearn.hard_sparsity", u.hard_sparsity);
  u.alternation_ratio = as_int(kv, "unlearn.alternation_ratio", u.alternation_ratio);
  u.mask_ce = kv.get_bool("unlearn.mask_ce", u.mask_ce);
  u.crop_padding = as_int(kv, "unlearn.crop_padding", u.crop_padding);
  u.hflip_prob = kv.get_double("unlearn.hflip_prob", u.hflip_prob);
  u.seed = kv.get_int("unlearn.seed", c.run_seed);
  u.ft_epochs = as_int(kv, "ft.epochs", u.ft_epochs);
  u.ft_lr = kv.get_double("ft.lr", u.ft_lr);
  u.ga_epochs = as_int(kv, "ga.epochs", u.ga_epochs);
  u.ga_lr = kv.get_double("ga.lr", u.ga_lr);
  u.rl_epochs = as_int(kv, "rl.epochs", u.rl_epochs);
  u.rl_lr = kv.get_double("rl.lr", u.rl_lr);
  if (const auto m = mask_mode_for(c.method)) u.mask_mode = *m;

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  train.validate();
  unlearn.validate();
  if (split.seed < 0) throw ConfigError("split.seed must be >= 0");
  if (split.mode == SplitMode::random && !(split.fraction >= 0.0 && split.fraction <= 1.0)) {
    throw ConfigError("split.fraction must be in [0,1]");
  }
  if (synthetic && dataset.kind == DatasetChoice::Kind::cifar100) {
    throw ConfigError("synthetic data is generated in the CIFAR-10 layout; use cifar10 or toy-subset(n)");
  }
  if (synthetic && data_dir.empty()) {
    throw ConfigError("data.synthetic needs data.dir to know where to write the files");
  }
  const int k = dataset.kind == DatasetChoice::Kind::cifar100 ? 100 : 10;
  if (split.mode == SplitMode::class_wise && (split.target_class < 0 || split.target_class >= k)) {
    throw ConfigError("split.class must be in [0," + std::to_string(k) + ")");
  }
  if (dataset.kind == DatasetChoice::Kind::toy_subset && dataset.toy_size < 10) {
    throw ConfigError("toy-subset needs at least one sample per class");
  }
}

ArchitectureSpec ExperimentConfig::architecture_spec(int num_classes) const {
  return architecture == Architecture::small_cnn ? ArchitectureSpec::small_cnn(num_classes)
                                                 : ArchitectureSpec::resnet18_cifar(num_classes);
}

KeyValues ExperimentConfig::identity() const {
  KeyValues kv;
  kv.set("dataset", dataset.name());
  kv.set("architecture", to_string(architecture));
  kv.set("data.synthetic", flag(synthetic));
  if (synthetic) {
    kv.set("data.synthetic.seed", num(synthetic_options.seed));
    kv.set("data.synthetic.noise_stddev", num(synthetic_options.noise_stddev));
    kv.set("data.synthetic.label_noise", num(synthetic_options.label_noise));
    kv.set("data.synthetic.train_per_class", num(static_cast<std::uint64_t>(synthetic_options.train_per_class)));
    kv.set("data.synthetic.test_per_class", num(static_cast<std::uint64_t>(synthetic_options.test_per_class)));
  }
  kv.set("toy.seed", num(toy_seed));
  kv.set("split.mode", to_string(split.mode));
  if (split.mode == SplitMode::random) {
    kv.set("split.fraction", num(split.fraction));
  } else {
    kv.set("split.class", num(split.target_class));
  }
  kv.set("split.seed", num(split.seed));
  kv.set("run_seed", num(run_seed));
  kv.set("train.epochs", num(train.epochs));
  kv.set("train.lr", num(train.lr));
  kv.set("train.momentum", num(train.momentum));
  kv.set("train.weight_decay", num(train.weight_decay));
  kv.set("train.batch_size", num(static_cast<std::uint64_t>(train.batch_size)));
  kv.set("train.augment", flag(train.augment));
  kv.set("train.cosine", flag(train.cosine_schedule));
  kv.set("train.warmup_steps", num(static_cast<std::uint64_t>(train.warmup_steps)));
  kv.set("train.seed", num(train.seed));
  return kv;
}

KeyValues ExperimentConfig::resolved() const {
  KeyValues kv = identity();
  if (!data_dir.empty()) kv.set("data.dir", data_dir.string());
  kv.set("method", tools::to_string(method));
  kv.set("mia.seed", num(mia_seed));
  const auto& u = unlearn;
  kv.set("unlearn.tau", num(u.tau));
  kv.set("unlearn.phase1_epochs", num(u.phase1_epochs));
  kv.set("unlearn.phase2_epochs", num(u.phase2_epochs));
  kv.set("unlearn.phase1_lr", num(u.phase1_lr));
  kv.set("unlearn.phase2_lr", num(u.phase2_lr));
  kv.set("unlearn.momentum", num(u.momentum));
  kv.set("unlearn.weight_decay", num(u.weight_decay));
  kv.set("unlearn.batch_size_forget", num(static_cast<std::uint64_t>(u.batch_size_forget)));
  kv.set("unlearn.batch_size_retain", num(static_cast<std::uint64_t>(u.batch_size_retain)));
  kv.set("unlearn.hard_sparsity", num(u.hard_sparsity));
  kv.set("unlearn.alternation_ratio", num(u.alternation_ratio));
  kv.set("unlearn.mask_ce", flag(u.mask_ce));
  kv.set("unlearn.crop_padding", num(u.crop_padding));
  kv.set("unlearn.hflip_prob", num(u.hflip_prob));
  kv.set("unlearn.seed", num(u.seed));
  kv.set("ft.epochs", num(u.ft_epochs));
  kv.set("ft.lr", num(u.ft_lr));
  kv.set("ga.epochs", num(u.ga_epochs));
  kv.set("ga.lr", num(u.ga_lr));
  kv.set("rl.epochs", num(u.rl_epochs));
  kv.set("rl.lr", num(u.rl_lr));
  return kv;
}

fs::path resolve_data_dir(const ExperimentConfig& cfg) {
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  if (const char* env = std::getenv("UNLEARN_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  throw InputError("no dataset directory: set data.dir in the config or UNLEARN_DATA_DIR");
}

DatasetPair load_dataset(const ExperimentConfig& cfg) {
  const fs::path dir = resolve_data_dir(cfg);
  if (cfg.synthetic && !has_cifar10(dir)) {
    write_synthetic_cifar10(dir / "cifar-10-batches-bin", cfg.synthetic_options);
  }
  switch (cfg.dataset.kind) {
    case DatasetChoice::Kind::cifar10: return load_cifar10(dir);
    case DatasetChoice::Kind::cifar100: return load_cifar100(dir);
    case DatasetChoice::Kind::toy_subset: {
      auto d = load_cifar10(dir);
      if (cfg.dataset.toy_size > d.train.size()) {
        throw ConfigError("toy-subset size exceeds the training set");
      }
      const auto idx = stratified_subset(d.train, cfg.dataset.toy_size, cfg.toy_seed);
      return DatasetPair{d.train.subset(idx, cfg.dataset.name()), std::move(d.test)};
    }
  }
  throw ConfigError("unsupported dataset");
}

Experiment::Experiment(ExperimentConfig cfg, Logger log)
    : cfg_(std::move(cfg)), log_(std::move(log)) {
  cfg_.validate();
  if (cfg_.output_dir.empty()) throw ConfigError("no output directory (output_dir or --output)");
  fs::create_directories(cfg_.output_dir / "checkpoints");
  fs::create_directories(cfg_.output_dir / "reports");
  fs::create_directories(cfg_.output_dir / "tables");
  write_lock();
}

void Experiment::log(const std::string& line) const {
  if (log_) log_(line);
}

void Experiment::write_lock() {
  const fs::path lock = path("config.lock");
  if (fs::exists(lock)) {
    const auto previous = KeyValues::load(lock);
    const auto current = cfg_.identity();
    for (const auto& [key, value] : current.values()) {
      const auto old = previous.get(key);
      if (old && *old != value) {
        throw ConfigError(cfg_.output_dir.string() + " belongs to a different experiment (" + key +
                          " = " + *old + ", now " + value + "); use a fresh output directory");
      }
    }
  }
  std::ofstream out(lock, std::ios::trunc);
  if (!out) throw InputError("cannot write " + lock.string());
  out << cfg_.resolved().to_string();
}

const DatasetPair& Experiment::data() {
  if (!data_) {
    log("loading " + cfg_.dataset.name());
    data_ = load_dataset(cfg_);
  }
  return *data_;
}

const ForgetSplit& Experiment::split() {
  if (split_) return *split_;
  const auto& train = data().train;
  const fs::path manifest = path("split.manifest");
  if (fs::exists(manifest)) {
    auto s = read_split_manifest(manifest);
    if (s.num_samples != train.size() || s.dataset != train.name()) {
      throw InputError(manifest.string() + " was written for " + s.dataset + " with " +
                       std::to_string(s.num_samples) + " samples");
    }
    split_ = std::move(s);
  } else {
    split_ = make_forget_split(train, cfg_.split);
    write_split_manifest(manifest, *split_);
  }
  log("split: " + std::to_string(split_->forget_indices.size()) + " forget / " +
      std::to_string(split_->retain_indices.size()) + " retain");
  return *split_;
}

fs::path Experiment::original_checkpoint() const {
  return original_override_.empty() ? path("checkpoints/original.ckpt") : original_override_;
}

namespace {

const char* step_name(StepKind k) {
  switch (k) {
    case StepKind::forget_kl: return "kl";
    case StepKind::contrastive: return "contrastive";
    case StepKind::retain_ce: return "retain-ce";
    case StepKind::train_ce: return "ce";
    case StepKind::ascent_ce: return "ascent-ce";
  }
  return "loss";
}

PhaseHooks epoch_logger(const Logger& log, const std::string& label, const PhaseHooks& inner) {
  PhaseHooks hooks = inner;
  if (!log) return hooks;
  // Per step kind, in first-seen order.
  struct Sum {
    StepKind kind;
    double sum = 0.0;
    std::size_t n = 0;
  };
  struct State {
    int epoch = -1;
    std::vector<Sum> sums;
  };
  auto state = std::make_shared<State>();
  auto flush = [log, label, state] {
    if (!state->sums.empty()) {
      std::string line = label + " epoch " + std::to_string(state->epoch + 1);
      for (const auto& s : state->sums) {
        line += std::string(" ") + step_name(s.kind) + " " +
                std::to_string(s.sum / static_cast<double>(s.n));
      }
      log(line);
    }
    state->sums.clear();
  };
  hooks.on_step = [inner, state, flush](const StepEvent& e) {
    if (e.epoch != state->epoch) {
      flush();
      state->epoch = e.epoch;
    }
    auto it = std::find_if(state->sums.begin(), state->sums.end(),
                           [&](const Sum& s) { return s.kind == e.kind; });
    if (it == state->sums.end()) it = state->sums.insert(it, Sum{e.kind});
    it->sum += e.loss * static_cast<double>(e.batch_size);
    it->n += e.batch_size;
    if (inner.on_step) inner.on_step(e);
  };
  hooks.on_phase_end = [inner, flush](const std::string& phase, const Classifier& m) {
    flush();
    if (inner.on_phase_end) inner.on_phase_end(phase, m);
  };
  return hooks;
}

double info_seconds(const Checkpoint& ck, const std::string& key) {
  const auto it = ck.info.find(key);
  if (it == ck.info.end()) return 0.0;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw InputError("checkpoint field " + key + " is not a number");
  }
}

std::string seconds_text(double s) {
  std::ostringstream os;
  os.precision(17);
  os << s;
  return os.str();
}

}  // namespace

const Classifier& Experiment::original() {
  if (original_) return *original_;
  const fs::path ckpt = original_checkpoint();
  if (fs::exists(ckpt)) {
    const auto ck = read_checkpoint(ckpt);
    original_ = load_classifier(ckpt);
    original_seconds_ = info_seconds(ck, "train_seconds");
    if (original_->spec().num_classes != data().train.num_classes()) {
      throw InputError(ckpt.string() + " has the wrong number of classes for " + cfg_.dataset.name());
    }
    log("reusing " + ckpt.string());
    return *original_;
  }
  const auto& train = data().train;
  std::vector<std::size_t> all(train.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  PhaseReport report;
  log("training original model (" + std::to_string(cfg_.train.epochs) + " epochs)");
  PhaseHooks hooks = epoch_logger(log_, "train", {});
  original_ = train_classifier(cfg_.architecture_spec(train.num_classes()), train, all, cfg_.train,
                               &report, hooks);
  original_seconds_ = report.seconds;
  save_checkpoint(ckpt, *original_, nullptr, {{"train_seconds", seconds_text(report.seconds)}});

  std::ofstream logf(path("reports/train_original.log"), std::ios::trunc);
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
    logf << "epoch " << e + 1 << " loss " << report.epoch_losses[e] << "\n";
  }
  logf << "seconds " << report.seconds << "\n";
  return *original_;
}

double Experiment::original_seconds() {
  original();
  return original_seconds_;
}

std::optional<MetricsReport> Experiment::reference_report() const {
  const fs::path ref = path("reports/retrain.json");
  if (!fs::exists(ref)) return std::nullopt;
  return read_report(ref);
}

MetricsReport Experiment::evaluate_model(const Classifier& model, double rte, const std::string& name) {
  const auto ref = name == "retrain" ? std::nullopt : reference_report();
  log("evaluating " + name);
  auto report = evaluate_all(model, data().train, split(), data().test, rte, name,
                             ref ? &*ref : nullptr, cfg_.mia_seed);
  write_report(path("reports/" + name + ".json"), report);
  return report;
}

MethodOutcome Experiment::run(Method method, const PhaseHooks& hooks) {
  const std::string name = to_string(method);
  const fs::path ckpt = path("checkpoints/" + name + ".ckpt");
  const auto& train = data().train;
  const auto& s = split();

  if (fs::exists(ckpt)) {
    const auto ck = read_checkpoint(ckpt);
    MethodOutcome out{load_classifier(ckpt), {}, {}, true};
    log("reusing " + ckpt.string());
    out.report = evaluate_model(out.model, info_seconds(ck, "rte_seconds"), name);
    return out;
  }

  UnlearnConfig ucfg = cfg_.unlearn;
  if (const auto m = mask_mode_for(method)) ucfg.mask_mode = *m;
  const PhaseHooks logged = epoch_logger(log_, name, hooks);

  std::optional<UnlearnResult> result;
  if (method == Method::retrain) {
    log("retraining on the retain set (" + std::to_string(cfg_.train.epochs) + " epochs)");
    result = retrain_gold(cfg_.architecture_spec(train.num_classes()), train, s, cfg_.train, logged);
  } else {
    const Classifier& base = original();
    log("running " + name);
    switch (method) {
      case Method::ft: result = ft_baseline(base, train, s, ucfg, logged); break;
      case Method::ga: result = ga_baseline(base, train, s, ucfg, logged); break;
      case Method::rl: result = rl_baseline(base, train, s, ucfg, logged); break;
      default:
        result = wss_cl_unlearn(base, train, s, ucfg, nullptr, logged);
        if (result->mask) save_mask(path("checkpoints/" + name + ".mask"), *result->mask);

    }
  }
  save_checkpoint(ckpt, result->model, nullptr, {{"rte_seconds", seconds_text(result->rte_seconds)}});
  MethodOutcome out{std::move(result->model), {}, std::move(result->phases), false};
  out.report = evaluate_model(out.model, result->rte_seconds, name);
  return out;
}

MetricsReport Experiment::evaluate(const std::string& name) {
  if (name == "original") return evaluate_model(original(), original_seconds(), name);
  parse_method(name);
  const fs::path ckpt = path("checkpoints/" + name + ".ckpt");
  if (!fs::exists(ckpt)) {
    throw InputError("no checkpoint " + ckpt.string() + "; run `unlearn --method " + name + "` first");
  }
  const auto ck = read_checkpoint(ckpt);
  return evaluate_model(load_classifier(ckpt), info_seconds(ck, "rte_seconds"), name);
}

std::vector<PerClassRow> Experiment::per_class(Method method) {
  const int k = data().train.num_classes();
  if (method != Method::retrain) original();
  std::vector<PerClassRow> rows;
  for (int c = 0; c < k; ++c) {
    ExperimentConfig sub = cfg_;
    sub.split.mode = SplitMode::class_wise;
    sub.split.target_class = c;
    sub.output_dir = cfg_.output_dir / "per-class" / ("class-" + std::to_string(c));
    Experiment e(sub, log_);
    e.data_ = data_;
    e.use_original_from(original_checkpoint());
    log("class " + std::to_string(c) + " of " + std::to_string(k));
    rows.push_back({c, e.run(method).report});
  }
  return rows;
}

}  // namespace unlearn::tools
