#include "unlearn/config.hpp"

#include <cmath>
#include <numbers>

#include "unlearn/errors.hpp"

namespace unlearn {

std::string to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::none: return "none";
    case MaskMode::hard: return "hard";
    case MaskMode::soft: return "soft";
  }
  return "none";
}

MaskMode parse_mask_mode(const std::string& name) {
  if (name == "none") return MaskMode::none;
  if (name == "hard") return MaskMode::hard;
  if (name == "soft") return MaskMode::soft;
  throw ConfigError("unknown mask mode '" + name + "' (expected none, hard or soft)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (seed < 0) throw ConfigError("train.seed must be >= 0");
}

double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  double lr = cfg.lr;
  if (cfg.cosine_schedule && total_steps > 0) {
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  }
  if (step < cfg.warmup_steps) {
    lr *= static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  }
  return lr;
}

void UnlearnConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("unlearn.tau must be > 0");
  if (phase1_epochs < 1) throw ConfigError("unlearn.phase1_epochs must be >= 1");
  if (phase2_epochs < 1) throw ConfigError("unlearn.phase2_epochs must be >= 1");
  if (!(phase1_lr > 0.0)) throw ConfigError("unlearn.phase1_lr must be > 0");
  if (!(phase2_lr > 0.0)) throw ConfigError("unlearn.phase2_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("unlearn.momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("unlearn.weight_decay must be >= 0");
  if (batch_size_forget < 1 || batch_size_retain < 1) {
    throw ConfigError("unlearn batch sizes must be >= 1");
  }
  if (!(hard_sparsity > 0.0 && hard_sparsity <= 1.0)) {
    throw ConfigError("unlearn.hard_sparsity must be in (0,1]");
  }
  if (alternation_ratio < 1) throw ConfigError("unlearn.alternation_ratio must be >= 1");
  if (crop_padding < 0) throw ConfigError("unlearn.crop_padding must be >= 0");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
    throw ConfigError("unlearn.hflip_prob must be in [0,1]");
  }
  if (seed < 0) throw ConfigError("unlearn.seed must be >= 0");
  if (ft_epochs < 1) throw ConfigError("unlearn.ft_epochs must be >= 1");
  if (!(ft_lr > 0.0)) throw ConfigError("unlearn.ft_lr must be > 0");
  if (ga_epochs < 1) throw ConfigError("unlearn.ga_epochs must be >= 1");
  if (!(ga_lr >= 0.0)) throw ConfigError("unlearn.ga_lr must be >= 0");
  if (rl_epochs < 1) throw ConfigError("unlearn.rl_epochs must be >= 1");
  if (!(rl_lr > 0.0)) throw ConfigError("unlearn.rl_lr must be > 0");
}

}  // namespace unlearn
