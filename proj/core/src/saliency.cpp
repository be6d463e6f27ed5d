#include "unlearn/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "unlearn/checkpoint.hpp"
#include "unlearn/losses.hpp"

namespace unlearn {

SaliencyMask SaliencyMask::ones_like(const ParamTable<float>& params) {
  SaliencyMask mask;
  mask.mode = MaskMode::none;
  mask.sparsity = 1.0;
  mask.values = ParamTable<float>::filled_like(params, 1.0f);
  return mask;
}

SaliencyMask soft_mask_from_gradients(const ParamGrads<float>& grads) {
  SaliencyMask mask;
  mask.mode = MaskMode::soft;
  mask.values = ParamTable<float>::filled_like(grads, 0.0f);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& g = grads[i];
    auto& m = mask.values[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = static_cast<float>(soft_saliency(static_cast<double>(g[j])));
    }
  }
  return mask;
}

SaliencyMask hard_mask_from_gradients(const ParamGrads<float>& grads, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("hard-mask sparsity q must be in (0,1]");
  SaliencyMask mask;
  mask.mode = MaskMode::hard;
  mask.sparsity = q;
  mask.values = ParamTable<float>::filled_like(grads, 0.0f);

  std::vector<float> flat;
  flat.reserve(grads.total_elements());
  for (const auto& e : grads) {
    for (const float v : e.value.values()) flat.push_back(std::abs(v));
  }
  const auto total = flat.size();
  const auto k = std::min<std::size_t>(total, static_cast<std::size_t>(std::llround(q * total)));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return flat[a] != flat[b] ? flat[a] > flat[b] : a < b;
                   });

  std::vector<std::uint8_t> keep(total, 0);
  for (std::size_t i = 0; i < k; ++i) keep[order[i]] = 1;
  std::size_t flat_index = 0;
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    auto& m = mask.values[i];
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = keep[flat_index++] ? 1.0f : 0.0f;
  }
  return mask;
}

ParamGrads<float> forgetting_gradient(const Classifier& model, const LabeledDataset& train,
                                      std::span<const std::size_t> forget,
                                      std::size_t batch_size) {
  if (forget.empty()) throw ConfigError("forget set is empty");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  auto total = ParamGrads<float>::filled_like(model.params(), 0.0f);
  const double n = static_cast<double>(forget.size());
  for (std::size_t start = 0; start < forget.size(); start += batch_size) {
    const auto chunk = forget.subspan(start, std::min(batch_size, forget.size() - start));
    const auto fwd = model.infer(train.batch(chunk), true);
    auto loss = kl_uniform_loss(fwd.logits);
    // Batch-mean gradient reweighted so the sum over chunks is the full-set mean.
    const float w = static_cast<float>(static_cast<double>(chunk.size()) / n);
    for (float& v : loss.grad.values()) v *= w;
    const auto grads = model.backward(Objective<float>::on_logits(fwd, loss.value, loss.grad));
    for (std::size_t i = 0; i < total.size(); ++i) {
      auto& dst = total[i];
      const auto& src = grads[i];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  return total;
}

SaliencyMask compute_saliency(const Classifier& model, const LabeledDataset& train,
                              std::span<const std::size_t> forget, const UnlearnConfig& cfg,
                              MaskMode mode) {
  if (mode == MaskMode::hard && !(cfg.hard_sparsity > 0.0 && cfg.hard_sparsity <= 1.0)) {
    throw ConfigError("hard-mask sparsity q must be in (0,1]");
  }
  if (forget.empty()) throw ConfigError("forget set is empty");
  if (mode == MaskMode::none) return SaliencyMask::ones_like(model.params());
  const auto g = forgetting_gradient(model, train, forget, cfg.batch_size_forget);
  return mode == MaskMode::soft ? soft_mask_from_gradients(g)
                                : hard_mask_from_gradients(g, cfg.hard_sparsity);
}

ParamGrads<float> apply_mask(const ParamGrads<float>& grads, const SaliencyMask& mask) {
  if (!grads.congruent_with(mask.values)) {
    throw UsageError("saliency mask is not congruent with the gradients");
  }
  ParamGrads<float> out = grads;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& g = out[i];
    const auto& m = mask.values[i];
    for (std::size_t j = 0; j < g.size(); ++j) g[j] *= m[j];
  }
  return out;
}

void save_mask(const std::filesystem::path& path, const SaliencyMask& mask) {
  TensorArchive archive;
  archive.meta["kind"] = "saliency-mask";
  archive.meta["mode"] = to_string(mask.mode);
  std::ostringstream q;
  q.precision(17);
  q << mask.sparsity;
  archive.meta["sparsity"] = q.str();
  archive.sections.emplace_back("mask", mask.values);
  write_archive(path, archive);
}

SaliencyMask load_mask(const std::filesystem::path& path) {
  const auto archive = read_archive(path);
  const auto kind = archive.meta.find("kind");
  const auto* values = archive.section("mask");
  if (kind == archive.meta.end() || kind->second != "saliency-mask" || values == nullptr) {
    throw InputError(path.string() + " is not a saliency-mask archive");
  }
  SaliencyMask mask;
  mask.mode = parse_mask_mode(archive.meta.at("mode"));
  mask.sparsity = std::stod(archive.meta.at("sparsity"));
  mask.values = *values;
  return mask;
}

}  // namespace unlearn
