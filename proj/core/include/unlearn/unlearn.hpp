#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unlearn/config.hpp"
#include "unlearn/data.hpp"
#include "unlearn/model.hpp"
#include "unlearn/saliency.hpp"

namespace unlearn {

struct PhaseReport {
  std::string name;
  std::vector<double> epoch_losses;      // kl, contrastive or ce depending on phase
  std::vector<double> epoch_aux_losses;  // adversarial phase: retain ce
  double seconds = 0.0;
  int epochs = 0;
  std::size_t steps = 0;
};

enum class StepKind { forget_kl, contrastive, retain_ce, train_ce, ascent_ce };

struct StepEvent {
  StepKind kind;
  int epoch;
  std::size_t step;  // index within the phase
  std::size_t batch_size;
  double loss;
};

// Optional observers. Phase callbacks see the model at the boundary; they are
// excluded from the phase's wall-clock time.
struct PhaseHooks {
  std::function<void(const std::string& phase, const Classifier& model)> on_phase_start;
  std::function<void(const std::string& phase, const Classifier& model)> on_phase_end;
  std::function<void(const StepEvent&)> on_step;
};

struct UnlearnResult {
  Classifier model;
  std::vector<PhaseReport> phases;
  std::optional<SaliencyMask> mask;
  double rte_seconds = 0.0;
};

// Supervised CE training from the current parameters on train[indices].
// Labels come from the dataset unless `labels` (parallel to indices) is given.
PhaseReport train_epochs(Classifier& model, const LabeledDataset& train,
                         std::span<const std::size_t> indices, const TrainConfig& cfg,
                         std::span<const int> labels = {}, const PhaseHooks& hooks = {});

// Fresh model from (spec, cfg.seed) trained on train[indices].
Classifier train_classifier(const ArchitectureSpec& spec, const LabeledDataset& train,
                            std::span<const std::size_t> indices, const TrainConfig& cfg,
                            PhaseReport* report = nullptr, const PhaseHooks& hooks = {});

// Phase 1: minimise the KL-to-uniform loss over forget batches only.
PhaseReport forgetting_phase(Classifier& model, const LabeledDataset& train,
                             std::span<const std::size_t> forget, const UnlearnConfig& cfg,
                             const PhaseHooks& hooks = {});

// Phase 2: per forget batch, one contrastive step (gradients gated by `mask`
// when non-null) followed by alternation_ratio retain CE steps. The first CE
// step uses the retain batch that supplied the negatives.
PhaseReport adversarial_finetune_phase(Classifier& model, const LabeledDataset& train,
                                       std::span<const std::size_t> forget,
                                       std::span<const std::size_t> retain,
                                       const SaliencyMask* mask, const UnlearnConfig& cfg,
                                       const PhaseHooks& hooks = {});

// Phase 1, mask computation (cfg.mask_mode), phase 2. `explicit_mask`
// replaces the computed mask. RTE covers all three stages.
UnlearnResult wss_cl_unlearn(const Classifier& original, const LabeledDataset& train,
                             const ForgetSplit& split, const UnlearnConfig& cfg,
                             const SaliencyMask* explicit_mask = nullptr,
                             const PhaseHooks& hooks = {});

UnlearnResult retrain_gold(const ArchitectureSpec& spec, const LabeledDataset& train,
                           const ForgetSplit& split, const TrainConfig& cfg,
                           const PhaseHooks& hooks = {});

UnlearnResult ft_baseline(const Classifier& original, const LabeledDataset& train,
                          const ForgetSplit& split, const UnlearnConfig& cfg,
                          const PhaseHooks& hooks = {});

// Sign-flipped SGD on the forget-set CE. ga_lr = 0 performs the configured
// steps without changing the parameters.
UnlearnResult ga_baseline(const Classifier& original, const LabeledDataset& train,
                          const ForgetSplit& split, const UnlearnConfig& cfg,
                          const PhaseHooks& hooks = {});

// Each forget label is replaced by (y + 1 + u) mod K with u uniform in
// [0, K-2]; the model is then fine-tuned on the relabelled D_f plus D_r.
std::vector<int> random_wrong_labels(std::span<const int> labels, int num_classes,
                                     std::uint64_t seed);

UnlearnResult rl_baseline(const Classifier& original, const LabeledDataset& train,
                          const ForgetSplit& split, const UnlearnConfig& cfg,
                          const PhaseHooks& hooks = {});

}  // namespace unlearn
