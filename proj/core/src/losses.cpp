#include "unlearn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace unlearn {

namespace {

template <typename T>
void check_logits(const Tensor<T>& logits) {
  if (logits.rank() != 2 || logits.dim(0) == 0) {
    throw InputError("expected logits [B,K] with B >= 1, got " + shape_to_string(logits.shape()));
  }
  if (logits.dim(1) < 2) throw InputError("need at least two classes (K >= 2)");
  for (const T v : logits.values()) {
    if (!std::isfinite(v)) throw NumericError("non-finite logit");
  }
}

// log-softmax of one row into `out`.
template <typename T>
void log_softmax_row(std::span<const T> row, std::vector<double>& out) {
  const double m = static_cast<double>(*std::max_element(row.begin(), row.end()));
  double sum = 0.0;
  for (const T v : row) sum += std::exp(static_cast<double>(v) - m);
  const double lse = m + std::log(sum);
  out.resize(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) out[k] = static_cast<double>(row[k]) - lse;
}

template <typename T>
void check_labels(std::span<const int> labels, std::size_t batch, std::size_t k) {
  if (labels.size() != batch) {
    throw InputError("label count " + std::to_string(labels.size()) + " != batch " +
                     std::to_string(batch));
  }
  for (const int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      throw InputError("label " + std::to_string(l) + " outside [0," + std::to_string(k) + ")");
    }
  }
}

template <typename T>
void check_unit_rows(const Tensor<T>& t, std::size_t d, const char* what) {
  if (t.rank() != 2 || t.dim(1) != d) {
    throw InputError(std::string(what) + " must be [N," + std::to_string(d) + "], got " +
                     shape_to_string(t.shape()));
  }
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    double sq = 0.0;
    for (const T v : t.row(i)) sq += static_cast<double>(v) * v;
    // A zero row is what normalising an all-zero feature vector yields.
    if (sq != 0.0 && std::abs(std::sqrt(sq) - 1.0) > 1e-3) {
      throw UsageError(std::string(what) + " rows must be L2-normalised");
    }
  }
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<double>(a[j]) * b[j];
  return s;
}

}  // namespace

template <typename T>
LossGrad<T> kl_uniform_loss(const Tensor<T>& logits) {
  check_logits(logits);
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  const double log_k = std::log(static_cast<double>(k));
  LossGrad<T> out;
  out.grad = Tensor<T>(logits.shape());
  std::vector<double> logp;
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    log_softmax_row<T>(logits.row(i), logp);
    double neg_entropy = 0.0;  // sum p log p
    for (const double lp : logp) neg_entropy += std::exp(lp) * lp;
    total += log_k + neg_entropy;
    // d/dz_j sum_k p_k log p_k = p_j (log p_j - sum_k p_k log p_k)
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = static_cast<T>(std::exp(logp[j]) * (logp[j] - neg_entropy) / batch);
    }
  }
  out.value = std::max(total / batch, 0.0);
  return out;
}

template <typename T>
LossGrad<T> retain_ce_loss(const Tensor<T>& logits, std::span<const int> labels) {
  check_logits(logits);
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  check_labels<T>(labels, batch, k);
  LossGrad<T> out;
  out.grad = Tensor<T>(logits.shape());
  std::vector<double> logp;
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    log_softmax_row<T>(logits.row(i), logp);
    const auto y = static_cast<std::size_t>(labels[i]);
    total -= logp[y];
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = static_cast<T>((std::exp(logp[j]) - (j == y ? 1.0 : 0.0)) / batch);
    }
  }
  out.value = total / batch;
  return out;
}

template <typename T>
std::vector<double> per_sample_ce(const Tensor<T>& logits, std::span<const int> labels) {
  check_logits(logits);
  check_labels<T>(labels, logits.dim(0), logits.dim(1));
  std::vector<double> out(logits.dim(0));
  std::vector<double> logp;
  for (std::size_t i = 0; i < out.size(); ++i) {
    log_softmax_row<T>(logits.row(i), logp);
    out[i] = -logp[static_cast<std::size_t>(labels[i])];
  }
  return out;
}

template <typename T>
ContrastiveGrad<T> contrastive_forget_loss(const Tensor<T>& anchors, const Tensor<T>& positives,
                                           const Tensor<T>& negatives, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature tau must be > 0");
  if (anchors.rank() != 2 || anchors.dim(0) == 0) {
    throw InputError("anchors must be a non-empty [B,d] array");
  }
  if (negatives.rank() != 2 || negatives.dim(0) == 0) {
    throw UsageError("contrastive loss needs at least one negative");
  }
  const std::size_t b = anchors.dim(0), d = anchors.dim(1), nr = negatives.dim(0);
  check_unit_rows(anchors, d, "anchors");
  check_unit_rows(positives, d, "positives");
  check_unit_rows(negatives, d, "negatives");
  if (positives.dim(0) != b) throw InputError("anchors and positives differ in count");

  ContrastiveGrad<T> out;
  out.d_anchors = Tensor<T>(anchors.shape());
  out.d_positives = Tensor<T>(positives.shape());
  out.d_negatives = Tensor<T>(negatives.shape());
  std::vector<double> scaled(nr + 1), d_anchor(d), d_neg_acc(nr * d, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const auto z = anchors.row(i);
    const auto zp = positives.row(i);
    scaled[0] = dot<T>(z, zp) / tau;
    for (std::size_t r = 0; r < nr; ++r) scaled[r + 1] = dot<T>(z, negatives.row(r)) / tau;
    const double m = *std::max_element(scaled.begin(), scaled.end());
    double sum = 0.0;
    for (const double a : scaled) sum += std::exp(a - m);
    const double lse = m + std::log(sum);
    total += lse - scaled[0];

    // dl/da_0 = p_0 - 1, dl/da_r = p_r; a = s / tau.
    const double w0 = (std::exp(scaled[0] - lse) - 1.0) / (tau * b);
    std::fill(d_anchor.begin(), d_anchor.end(), 0.0);
    for (std::size_t j = 0; j < d; ++j) d_anchor[j] += w0 * zp[j];
    auto dpos = out.d_positives.row(i);
    for (std::size_t j = 0; j < d; ++j) dpos[j] = static_cast<T>(w0 * z[j]);
    for (std::size_t r = 0; r < nr; ++r) {
      const double wr = std::exp(scaled[r + 1] - lse) / (tau * b);
      const auto zr = negatives.row(r);
      for (std::size_t j = 0; j < d; ++j) {
        d_anchor[j] += wr * zr[j];
        d_neg_acc[r * d + j] += wr * z[j];
      }
    }
    auto danc = out.d_anchors.row(i);
    for (std::size_t j = 0; j < d; ++j) danc[j] = static_cast<T>(d_anchor[j]);
  }
  for (std::size_t k = 0; k < d_neg_acc.size(); ++k) out.d_negatives[k] = static_cast<T>(d_neg_acc[k]);
  out.value = total / b;
  return out;
}

#define UNLEARN_INSTANTIATE_LOSSES(T)                                                        \
  template LossGrad<T> kl_uniform_loss<T>(const Tensor<T>&);                                 \
  template LossGrad<T> retain_ce_loss<T>(const Tensor<T>&, std::span<const int>);            \
  template std::vector<double> per_sample_ce<T>(const Tensor<T>&, std::span<const int>);     \
  template ContrastiveGrad<T> contrastive_forget_loss<T>(const Tensor<T>&, const Tensor<T>&, \
                                                         const Tensor<T>&, double);

UNLEARN_INSTANTIATE_LOSSES(float)
UNLEARN_INSTANTIATE_LOSSES(double)

#undef UNLEARN_INSTANTIATE_LOSSES

}  // namespace unlearn
