#pragma once

#include <span>
#include <vector>

#include "unlearn/tensor.hpp"

namespace unlearn {

// Scalar loss value together with its gradient w.r.t. the loss input.
template <typename T>
struct LossGrad {
  double value = 0.0;
  Tensor<T> grad;
};

// Batch mean of KL(softmax(logits_i) || Uniform(K)) = ln K - H(p_i).
// Throws NumericError on non-finite logits, InputError when K < 2.
template <typename T>
LossGrad<T> kl_uniform_loss(const Tensor<T>& logits);

// Batch mean of -ln softmax(logits_i)[label_i].
template <typename T>
LossGrad<T> retain_ce_loss(const Tensor<T>& logits, std::span<const int> labels);

// Unreduced cross-entropy per row, computed in double precision.
template <typename T>
std::vector<double> per_sample_ce(const Tensor<T>& logits, std::span<const int> labels);

template <typename T>
struct ContrastiveGrad {
  double value = 0.0;
  Tensor<T> d_anchors;
  Tensor<T> d_positives;
  Tensor<T> d_negatives;
};

// InfoNCE-style forgetting loss over a forget batch. Row i of `anchors` and
// `positives` is a positive pair (x_i, x'_i); every row of `negatives` is a
// negative for every anchor. With s = dot product of unit vectors:
//   l_i = -ln( e^{s(x_i,x'_i)/tau} /
//              (e^{s(x_i,x'_i)/tau} + sum_r e^{s(x_i,z_r)/tau}) )
// and the returned value is the mean over i. Rows must be L2-normalised.
template <typename T>
ContrastiveGrad<T> contrastive_forget_loss(const Tensor<T>& anchors, const Tensor<T>& positives,
                                           const Tensor<T>& negatives, double tau);

}  // namespace unlearn
