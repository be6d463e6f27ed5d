#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace unlearn {

enum class MaskMode { none, hard, soft };

std::string to_string(MaskMode mode);
MaskMode parse_mask_mode(const std::string& name);

// Supervised training of an original or retrained model.
struct TrainConfig {
  int epochs = 10;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 128;
  bool augment = true;
  bool cosine_schedule = true;
  // Linear ramp over the first steps; keeps unnormalised nets from dying early.
  std::size_t warmup_steps = 0;
  std::int64_t seed = 0;

  void validate() const;
};

// Learning rate for 0-based `step` of `total_steps`: linear warmup to cfg.lr,
// then cosine decay over the whole run when enabled.
double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

// Hyperparameters for the two-phase method and the fine-tuning baselines.
struct UnlearnConfig {
  double tau = 1.4;
  int phase1_epochs = 3;
  int phase2_epochs = 5;
  double phase1_lr = 1e-3;
  double phase2_lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size_forget = 256;
  std::size_t batch_size_retain = 256;
  MaskMode mask_mode = MaskMode::soft;
  double hard_sparsity = 0.5;
  int alternation_ratio = 1;
  bool mask_ce = false;  // also mask the retain cross-entropy steps
  int crop_padding = 4;
  double hflip_prob = 0.5;
  std::int64_t seed = 0;

  int ft_epochs = 2;
  double ft_lr = 0.01;
  int ga_epochs = 1;
  double ga_lr = 1e-4;
  int rl_epochs = 2;
  double rl_lr = 0.01;

  void validate() const;
};

}  // namespace unlearn
