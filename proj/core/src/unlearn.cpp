#include "unlearn/unlearn.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "unlearn/losses.hpp"
#include "unlearn/random.hpp"

namespace unlearn {

namespace {

// Stream tags for derive_seed so that no two random streams coincide.
enum : std::uint64_t {
  kTagTrainShuffle = 0x7101,
  kTagTrainAugment = 0x7102,
  kTagForgetShuffle = 0x7201,
  kTagRetainShuffle = 0x7202,
  kTagPositive = 0x7203,
  kTagAscentShuffle = 0x7301,
  kTagRelabel = 0x7401,
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void notify(const std::function<void(const std::string&, const Classifier&)>& hook,
            const std::string& phase, const Classifier& model) {
  if (hook) hook(phase, model);
}

void emit(const PhaseHooks& hooks, StepKind kind, int epoch, std::size_t step,
          std::size_t batch_size, double loss) {
  if (hooks.on_step) hooks.on_step(StepEvent{kind, epoch, step, batch_size, loss});
}

Tensor<float> augmented_batch(const LabeledDataset& data, std::span<const std::size_t> indices,
                              const AugmentationPolicy& policy, std::uint64_t seed) {
  Tensor<float> out({indices.size(), kImageChannels, kImageSide, kImageSide});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, {i}));
    const auto pixels = augment_image(data.image(indices[i]), policy, rng);
    normalize_into(pixels, policy.normalization, out.row(i));
  }
  return out;
}

double ce_step(Classifier& model, SgdOptimizer<float>& opt, const Tensor<float>& x,
               std::span<const int> labels, const SaliencyMask* mask) {
  const auto fwd = model.forward(x, true);
  auto loss = retain_ce_loss(fwd.logits, labels);
  auto grads = model.backward(Objective<float>::on_logits(fwd, loss.value, std::move(loss.grad)));
  if (mask != nullptr) grads = apply_mask(grads, *mask);
  opt.step(model, grads);
  return loss.value;
}

std::vector<std::size_t> positions(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

void require_split(const ForgetSplit& split, const LabeledDataset& train) {
  if (split.num_samples != train.size()) {
    throw ConfigError("split was made for " + std::to_string(split.num_samples) +
                      " samples but the dataset has " + std::to_string(train.size()));
  }
}

}  // namespace

PhaseReport train_epochs(Classifier& model, const LabeledDataset& train,
                         std::span<const std::size_t> indices, const TrainConfig& cfg,
                         std::span<const int> labels, const PhaseHooks& hooks) {
  cfg.validate();
  if (indices.empty()) throw ConfigError("training set is empty");
  if (!labels.empty() && labels.size() != indices.size()) {
    throw UsageError("label override must have one label per index");
  }
  const auto seed = static_cast<std::uint64_t>(cfg.seed);
  const AugmentationPolicy policy{4, 0.5, train.normalization()};
  BatchIterator batches(positions(indices.size()), cfg.batch_size,
                        derive_seed(seed, {kTagTrainShuffle}), false);
  const std::size_t total_steps = batches.batches_per_epoch() * static_cast<std::size_t>(cfg.epochs);
  SgdOptimizer<float> opt(SgdOptions{cfg.lr, cfg.momentum, cfg.weight_decay});

  PhaseReport report;
  report.name = "train";
  report.epochs = cfg.epochs;
  Stopwatch clock;
  model.set_mode(Mode::train);
  std::vector<std::size_t> idx;
  std::vector<int> y;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : batches.epoch(static_cast<std::size_t>(epoch))) {
      opt.set_lr(scheduled_lr(cfg, report.steps, total_steps));
      idx.clear();
      y.clear();
      for (const auto p : batch) {
        idx.push_back(indices[p]);
        y.push_back(labels.empty() ? train.label(indices[p]) : labels[p]);
      }
      const auto x = cfg.augment
                         ? augmented_batch(train, idx, policy,
                                           derive_seed(seed, {kTagTrainAugment,
                                                              static_cast<std::uint64_t>(epoch),
                                                              report.steps}))
                         : train.batch(idx);
      const double loss = ce_step(model, opt, x, y, nullptr);
      emit(hooks, StepKind::train_ce, epoch, report.steps, batch.size(), loss);
      sum += loss * static_cast<double>(batch.size());
      seen += batch.size();
      ++report.steps;
    }
    report.epoch_losses.push_back(sum / static_cast<double>(seen));
  }
  model.set_mode(Mode::eval);
  report.seconds = clock.seconds();
  return report;
}

Classifier train_classifier(const ArchitectureSpec& spec, const LabeledDataset& train,
                            std::span<const std::size_t> indices, const TrainConfig& cfg,
                            PhaseReport* report, const PhaseHooks& hooks) {
  cfg.validate();
  if (spec.num_classes != train.num_classes()) {
    throw ConfigError("architecture has " + std::to_string(spec.num_classes) +
                      " classes but dataset " + train.name() + " has " +
                      std::to_string(train.num_classes()));
  }
  Classifier model = build_classifier<float>(spec, cfg.seed);
  auto r = train_epochs(model, train, indices, cfg, {}, hooks);
  if (report != nullptr) *report = std::move(r);
  return model;
}

PhaseReport forgetting_phase(Classifier& model, const LabeledDataset& train,
                             std::span<const std::size_t> forget, const UnlearnConfig& cfg,
                             const PhaseHooks& hooks) {
  cfg.validate();
  if (forget.empty()) throw ConfigError("forget set is empty; nothing to forget");
  notify(hooks.on_phase_start, "forget", model);
  const auto seed = static_cast<std::uint64_t>(cfg.seed);
  BatchIterator batches({forget.begin(), forget.end()}, cfg.batch_size_forget,
                        derive_seed(seed, {kTagForgetShuffle}), false);
  SgdOptimizer<float> opt(SgdOptions{cfg.phase1_lr, cfg.momentum, cfg.weight_decay});

  PhaseReport report;
  report.name = "forget";
  report.epochs = cfg.phase1_epochs;
  Stopwatch clock;
  model.set_mode(Mode::train);
  for (int epoch = 0; epoch < cfg.phase1_epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& batch : batches.epoch(static_cast<std::size_t>(epoch))) {
      const auto fwd = model.forward(train.batch(batch), true);
      auto loss = kl_uniform_loss(fwd.logits);
      const auto grads =
          model.backward(Objective<float>::on_logits(fwd, loss.value, std::move(loss.grad)));
      opt.step(model, grads);
      emit(hooks, StepKind::forget_kl, epoch, report.steps, batch.size(), loss.value);
      sum += loss.value * static_cast<double>(batch.size());
      ++report.steps;
    }
    report.epoch_losses.push_back(sum / static_cast<double>(forget.size()));
  }
  model.set_mode(Mode::eval);
  report.seconds = clock.seconds();
  notify(hooks.on_phase_end, "forget", model);
  return report;
}

PhaseReport adversarial_finetune_phase(Classifier& model, const LabeledDataset& train,
                                       std::span<const std::size_t> forget,
                                       std::span<const std::size_t> retain,
                                       const SaliencyMask* mask, const UnlearnConfig& cfg,
                                       const PhaseHooks& hooks) {
  cfg.validate();
  if (forget.empty()) throw ConfigError("forget set is empty; nothing to forget");
  if (retain.empty()) throw ConfigError("retain set is empty; no negatives available");
  if (mask != nullptr && !mask->values.congruent_with(model.params())) {
    throw UsageError("saliency mask is not congruent with the model");
  }
  notify(hooks.on_phase_start, "adversarial", model);
  const auto seed = static_cast<std::uint64_t>(cfg.seed);
  const AugmentationPolicy policy{cfg.crop_padding, cfg.hflip_prob, train.normalization()};
  BatchIterator forget_batches({forget.begin(), forget.end()}, cfg.batch_size_forget,
                               derive_seed(seed, {kTagForgetShuffle}), false);
  BatchIterator retain_batches({retain.begin(), retain.end()}, cfg.batch_size_retain,
                               derive_seed(seed, {kTagRetainShuffle}), false);
  // The retain stream runs independently of forget epochs and wraps around.
  std::size_t retain_epoch = 0, retain_pos = 0;
  auto retain_epoch_batches = retain_batches.epoch(0);
  auto next_retain = [&]() -> const std::vector<std::size_t>& {
    if (retain_pos == retain_epoch_batches.size()) {
      retain_epoch_batches = retain_batches.epoch(++retain_epoch);
      retain_pos = 0;
    }
    return retain_epoch_batches[retain_pos++];
  };

  SgdOptimizer<float> opt(SgdOptions{cfg.phase2_lr, cfg.momentum, cfg.weight_decay});
  const SaliencyMask* ce_mask = cfg.mask_ce ? mask : nullptr;
  PhaseReport report;
  report.name = "adversarial";
  report.epochs = cfg.phase2_epochs;
  Stopwatch clock;
  model.set_mode(Mode::train);
  for (int epoch = 0; epoch < cfg.phase2_epochs; ++epoch) {
    double cl_sum = 0.0, ce_sum = 0.0;
    std::size_t cl_seen = 0, ce_seen = 0;
    const auto fb = forget_batches.epoch(static_cast<std::size_t>(epoch));
    for (std::size_t s = 0; s < fb.size(); ++s) {
      const auto& f = fb[s];
      const std::vector<std::size_t> r = next_retain();
      const std::size_t b = f.size(), nr = r.size();

      // One forward pass over [x; x'; x_r].
      Tensor<float> input({2 * b + nr, kImageChannels, kImageSide, kImageSide});
      for (std::size_t i = 0; i < b; ++i) {
        const auto pair = augment_positive_pair(
            train.sample(f[i]), policy,
            derive_seed(seed, {kTagPositive, static_cast<std::uint64_t>(epoch), s, i}));
        std::copy(pair.x.begin(), pair.x.end(), input.row(i).begin());
        std::copy(pair.x_prime.begin(), pair.x_prime.end(), input.row(b + i).begin());
      }
      const auto negatives_x = train.batch(r);
      std::copy(negatives_x.values().begin(), negatives_x.values().end(),
                input.row(2 * b).begin());
      const auto fwd = model.forward(input, true);

      const std::size_t d = fwd.features.dim(1);
      auto rows = [&](std::size_t from, std::size_t n) {
        Tensor<float> t({n, d});
        std::copy_n(fwd.features.row(from).begin(), n * d, t.data());
        return t;
      };
      const auto cl = contrastive_forget_loss(rows(0, b), rows(b, b), rows(2 * b, nr), cfg.tau);
      Tensor<float> d_features(fwd.features.shape());
      std::copy(cl.d_anchors.values().begin(), cl.d_anchors.values().end(), d_features.data());
      std::copy(cl.d_positives.values().begin(), cl.d_positives.values().end(),
                d_features.data() + b * d);
      std::copy(cl.d_negatives.values().begin(), cl.d_negatives.values().end(),
                d_features.data() + 2 * b * d);
      auto grads = model.backward(Objective<float>::on_features(fwd, cl.value, std::move(d_features)));
      if (mask != nullptr) grads = apply_mask(grads, *mask);
      opt.step(model, grads);
      emit(hooks, StepKind::contrastive, epoch, report.steps++, b, cl.value);
      cl_sum += cl.value * static_cast<double>(b);
      cl_seen += b;

      for (int k = 0; k < cfg.alternation_ratio; ++k) {
        const std::vector<std::size_t> rb = k == 0 ? r : next_retain();
        const double ce = ce_step(model, opt, train.batch(rb), train.batch_labels(rb), ce_mask);
        emit(hooks, StepKind::retain_ce, epoch, report.steps++, rb.size(), ce);
        ce_sum += ce * static_cast<double>(rb.size());
        ce_seen += rb.size();
      }
    }
    report.epoch_losses.push_back(cl_sum / static_cast<double>(cl_seen));
    report.epoch_aux_losses.push_back(ce_sum / static_cast<double>(ce_seen));
  }
  model.set_mode(Mode::eval);
  report.seconds = clock.seconds();
  notify(hooks.on_phase_end, "adversarial", model);
  return report;
}

UnlearnResult wss_cl_unlearn(const Classifier& original, const LabeledDataset& train,
                             const ForgetSplit& split, const UnlearnConfig& cfg,
                             const SaliencyMask* explicit_mask, const PhaseHooks& hooks) {
  cfg.validate();
  require_split(split, train);
  if (split.forget_indices.empty()) throw ConfigError("forget set is empty; nothing to forget");
  if (split.retain_indices.empty()) throw ConfigError("retain set is empty");

  UnlearnResult result{original, {}, std::nullopt, 0.0};
  result.phases.push_back(forgetting_phase(result.model, train, split.forget_indices, cfg, hooks));

  Stopwatch mask_clock;
  if (explicit_mask != nullptr) {
    result.mask = *explicit_mask;
  } else if (cfg.mask_mode != MaskMode::none) {
    result.mask = compute_saliency(result.model, train, split.forget_indices, cfg, cfg.mask_mode);
  }
  const double mask_seconds = mask_clock.seconds();

  result.phases.push_back(adversarial_finetune_phase(
      result.model, train, split.forget_indices, split.retain_indices,
      result.mask ? &*result.mask : nullptr, cfg, hooks));
  result.rte_seconds = result.phases[0].seconds + mask_seconds + result.phases[1].seconds;
  return result;
}

UnlearnResult retrain_gold(const ArchitectureSpec& spec, const LabeledDataset& train,
                           const ForgetSplit& split, const TrainConfig& cfg,
                           const PhaseHooks& hooks) {
  require_split(split, train);
  if (split.retain_indices.empty()) throw ConfigError("retain set is empty");
  PhaseReport report;
  Classifier model = train_classifier(spec, train, split.retain_indices, cfg, &report, hooks);
  report.name = "retrain";
  const double seconds = report.seconds;
  return UnlearnResult{std::move(model), {std::move(report)}, std::nullopt, seconds};
}

UnlearnResult ft_baseline(const Classifier& original, const LabeledDataset& train,
                          const ForgetSplit& split, const UnlearnConfig& cfg,
                          const PhaseHooks& hooks) {
  cfg.validate();
  require_split(split, train);
  if (split.retain_indices.empty()) throw ConfigError("retain set is empty");
  const TrainConfig tc{cfg.ft_epochs, cfg.ft_lr, cfg.momentum, cfg.weight_decay,
                       cfg.batch_size_retain, true, false, cfg.seed};
  UnlearnResult result{original, {}, std::nullopt, 0.0};
  auto report = train_epochs(result.model, train, split.retain_indices, tc, {}, hooks);
  report.name = "ft";
  result.rte_seconds = report.seconds;
  result.phases.push_back(std::move(report));
  return result;
}

UnlearnResult ga_baseline(const Classifier& original, const LabeledDataset& train,
                          const ForgetSplit& split, const UnlearnConfig& cfg,
                          const PhaseHooks& hooks) {
  cfg.validate();
  require_split(split, train);
  if (split.forget_indices.empty()) throw ConfigError("forget set is empty; nothing to forget");
  const auto seed = static_cast<std::uint64_t>(cfg.seed);
  BatchIterator batches(split.forget_indices, cfg.batch_size_forget,
                        derive_seed(seed, {kTagAscentShuffle}), false);
  std::optional<SgdOptimizer<float>> opt;
  if (cfg.ga_lr > 0.0) opt.emplace(SgdOptions{cfg.ga_lr, cfg.momentum, 0.0});

  UnlearnResult result{original, {}, std::nullopt, 0.0};
  PhaseReport report;
  report.name = "ga";
  report.epochs = cfg.ga_epochs;
  Stopwatch clock;
  Classifier& model = result.model;
  model.set_mode(Mode::train);
  for (int epoch = 0; epoch < cfg.ga_epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& batch : batches.epoch(static_cast<std::size_t>(epoch))) {
      const auto fwd = model.forward(train.batch(batch), true);
      const auto labels = train.batch_labels(batch);
      auto loss = retain_ce_loss(fwd.logits, labels);
      for (float& g : loss.grad.values()) g = -g;
      const auto grads =
          model.backward(Objective<float>::on_logits(fwd, -loss.value, std::move(loss.grad)));
      if (opt) opt->step(model, grads);
      emit(hooks, StepKind::ascent_ce, epoch, report.steps, batch.size(), loss.value);
      sum += loss.value * static_cast<double>(batch.size());
      ++report.steps;
    }
    report.epoch_losses.push_back(sum / static_cast<double>(split.forget_indices.size()));
  }
  model.set_mode(Mode::eval);
  report.seconds = clock.seconds();
  result.rte_seconds = report.seconds;
  result.phases.push_back(std::move(report));
  return result;
}

std::vector<int> random_wrong_labels(std::span<const int> labels, int num_classes,
                                     std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("relabelling needs at least two classes");
  std::mt19937_64 rng(derive_seed(seed, {kTagRelabel}));
  std::uniform_int_distribution<int> offset(0, num_classes - 2);
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw InputError("label " + std::to_string(labels[i]) + " out of range");
    }
    out[i] = (labels[i] + 1 + offset(rng)) % num_classes;
  }
  return out;
}

UnlearnResult rl_baseline(const Classifier& original, const LabeledDataset& train,
                          const ForgetSplit& split, const UnlearnConfig& cfg,
                          const PhaseHooks& hooks) {
  cfg.validate();
  require_split(split, train);
  if (split.forget_indices.empty()) throw ConfigError("forget set is empty; nothing to forget");
  const auto forget_labels = train.batch_labels(split.forget_indices);
  const auto wrong = random_wrong_labels(forget_labels, train.num_classes(),
                                         static_cast<std::uint64_t>(cfg.seed));
  std::vector<int> labels(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) labels[i] = train.label(i);
  for (std::size_t i = 0; i < wrong.size(); ++i) labels[split.forget_indices[i]] = wrong[i];
  const auto all = positions(train.size());

  const TrainConfig tc{cfg.rl_epochs, cfg.rl_lr, cfg.momentum, cfg.weight_decay,
                       cfg.batch_size_retain, true, false, cfg.seed};
  UnlearnResult result{original, {}, std::nullopt, 0.0};
  auto report = train_epochs(result.model, train, all, tc, labels, hooks);
  report.name = "rl";
  result.rte_seconds = report.seconds;
  result.phases.push_back(std::move(report));
  return result;
}

}  // namespace unlearn
