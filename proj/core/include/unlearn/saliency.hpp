#pragma once

#include <cmath>
#include <filesystem>
#include <span>

#include "unlearn/config.hpp"
#include "unlearn/data.hpp"
#include "unlearn/model.hpp"

namespace unlearn {

// Per-parameter update gate in [0,1], congruent with the model parameters.
struct SaliencyMask {
  MaskMode mode = MaskMode::none;
  double sparsity = 1.0;  // hard mode only: fraction of ones
  ParamTable<float> values;

  static SaliencyMask ones_like(const ParamTable<float>& params);
};

// |2(sigmoid(g) - 0.5)|, evaluated as |tanh(g/2)|.
inline double soft_saliency(double g) { return std::abs(std::tanh(0.5 * g)); }

SaliencyMask soft_mask_from_gradients(const ParamGrads<float>& grads);
// Ones on the round(q * total) coordinates with the largest |g| across the
// whole model; ties go to the earlier coordinate in parameter order.
SaliencyMask hard_mask_from_gradients(const ParamGrads<float>& grads, double q);

// Gradient of the mean KL-to-uniform loss over the whole forget set at the
// current parameters (eval mode), accumulated batch by batch in index order.
ParamGrads<float> forgetting_gradient(const Classifier& model, const LabeledDataset& train,
                                      std::span<const std::size_t> forget,
                                      std::size_t batch_size);

SaliencyMask compute_saliency(const Classifier& model, const LabeledDataset& train,
                              std::span<const std::size_t> forget, const UnlearnConfig& cfg,
                              MaskMode mode);

// g <- M (.) g, returned as a new table.
ParamGrads<float> apply_mask(const ParamGrads<float>& grads, const SaliencyMask& mask);

void save_mask(const std::filesystem::path& path, const SaliencyMask& mask);
SaliencyMask load_mask(const std::filesystem::path& path);

}  // namespace unlearn
