#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/tensor.hpp"

namespace unlearn {

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImagePixels = kImageChannels * kImageSide * kImageSide;

enum class Architecture { small_cnn, resnet18_cifar };

std::string to_string(Architecture arch);
// Throws ConfigError for unknown names.
Architecture parse_architecture(std::string_view name);

// small-cnn: conv(w)-ReLU-conv(w)-maxpool-conv(2w)-ReLU-conv(2w)-maxpool-
//            linear(d)-ReLU | head linear(K). Defaults w=32, d=128.
// resnet18-cifar: 3x3 stem, four stages of two basic blocks, global average
//            pool | head linear(K). Defaults w=64, d=8w=512.
struct ArchitectureSpec {
  Architecture name = Architecture::small_cnn;
  int num_classes = 10;
  int feature_dim = 128;
  int base_width = 32;

  static ArchitectureSpec small_cnn(int num_classes);
  static ArchitectureSpec resnet18_cifar(int num_classes);

  void validate() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

enum class Mode { train, eval };

template <typename T>
class ForwardTrace;  // opaque activation record used by backward
template <typename T>
class BasicClassifier;

template <typename T>
struct ForwardResult {
  Tensor<T> logits;    // B x K
  Tensor<T> features;  // B x d, rows L2-normalised
  std::shared_ptr<const ForwardTrace<T>> trace;
};

template <typename T>
using ParamGrads = ParamTable<T>;

// A differentiable scalar: its value plus the seeds needed to backpropagate it
// into one model. Seeds are gradients w.r.t. logits and/or normalised features
// of a recorded forward pass, and optionally a direct per-parameter term.
template <typename T>
class Objective {
 public:
  Objective() = default;

  static Objective on_logits(const ForwardResult<T>& fwd, double value,
                             Tensor<T> d_logits);
  static Objective on_features(const ForwardResult<T>& fwd, double value,
                               Tensor<T> d_features);
  // scale * (sum of every parameter element).
  static Objective parameter_sum(const BasicClassifier<T>& model, T scale);

  // Both terms must refer to the same forward pass (or have none).
  Objective& operator+=(const Objective& other);

  double value() const { return value_; }

 private:
  friend class BasicClassifier<T>;

  double value_ = 0.0;
  std::shared_ptr<const ForwardTrace<T>> trace_;
  Tensor<T> d_logits_;
  Tensor<T> d_features_;
  std::optional<ParamTable<T>> direct_;
  std::uint64_t direct_model_id_ = 0;
  std::uint64_t direct_version_ = 0;
};

template <typename T>
class BasicClassifier {
 public:
  // Deterministic initialisation from (spec, seed).
  BasicClassifier(ArchitectureSpec spec, std::uint64_t seed);
  // Wraps existing tables; they must match the architecture exactly.
  static BasicClassifier from_tables(ArchitectureSpec spec, std::uint64_t seed,
                                     ParamTable<T> params, ParamTable<T> buffers);

  BasicClassifier(const BasicClassifier& other);
  BasicClassifier& operator=(const BasicClassifier& other);
  BasicClassifier(BasicClassifier&&) noexcept = default;
  BasicClassifier& operator=(BasicClassifier&&) noexcept = default;
  ~BasicClassifier();

  const ArchitectureSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  const ParamTable<T>& params() const { return params_; }
  // Any mutable access invalidates outstanding forward traces.
  ParamTable<T>& mutable_params() {
    ++version_;
    return params_;
  }
  // Batch-norm running statistics; empty for small-cnn.
  const ParamTable<T>& buffers() const { return buffers_; }

  // Train mode uses batch statistics and updates running statistics.
  ForwardResult<T> forward(const Tensor<T>& batch, bool record = false);
  // Eval semantics regardless of mode; never mutates the model.
  ForwardResult<T> infer(const Tensor<T>& batch, bool record = false) const;

  ParamGrads<T> backward(const Objective<T>& objective) const;

  // Branch record of every ReLU (on/off) and max-pool (argmax) under the
  // current mode, without touching running statistics.
  // Two parameter settings with equal patterns lie on the same linear piece,
  // which finite-difference checks use to avoid straddling a kink.
  std::vector<std::uint32_t> activation_pattern(const Tensor<T>& batch) const;

  std::uint64_t identity() const { return id_; }
  std::uint64_t version() const { return version_; }

  template <typename U>
  BasicClassifier<U> cast() const {
    return BasicClassifier<U>::from_tables(spec_, seed_, params_.template cast<U>(),
                                           buffers_.template cast<U>());
  }

 private:
  struct Network;
  BasicClassifier(ArchitectureSpec spec, std::uint64_t seed, std::nullptr_t);

  ForwardResult<T> run(const Tensor<T>& batch, bool train, bool record,
                       ParamTable<T>* running_stats,
                       std::vector<std::uint32_t>* pattern = nullptr) const;

  ArchitectureSpec spec_;
  std::uint64_t seed_ = 0;
  Mode mode_ = Mode::train;
  ParamTable<T> params_;
  ParamTable<T> buffers_;
  std::shared_ptr<const Network> net_;
  std::uint64_t id_ = 0;
  std::uint64_t version_ = 0;
};

using Classifier = BasicClassifier<float>;

template <typename T>
BasicClassifier<T> build_classifier(const ArchitectureSpec& spec, std::int64_t seed);

template <typename T>
Tensor<T> forward_logits(BasicClassifier<T>& model, const Tensor<T>& batch) {
  return model.forward(batch).logits;
}

template <typename T>
Tensor<T> forward_features(BasicClassifier<T>& model, const Tensor<T>& batch) {
  return model.forward(batch).features;
}

template <typename T>
ParamGrads<T> compute_grads(const BasicClassifier<T>& model,
                            const Objective<T>& loss) {
  return model.backward(loss);
}

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;

  void validate() const;
};

// SGD with momentum. Weight decay is added to the gradient before the
// momentum update: d = g + wd*w; buf = momentum*buf + d; w -= lr*buf.
// Momentum buffers live as long as the optimiser (one training phase).
template <typename T>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdOptions options);

  void step(BasicClassifier<T>& model, const ParamGrads<T>& grads);

  const SgdOptions& options() const { return options_; }
  void set_lr(double lr);
  const ParamTable<T>& momentum_buffers() const { return buffers_; }
  void set_momentum_buffers(ParamTable<T> buffers) { buffers_ = std::move(buffers); }

 private:
  SgdOptions options_;
  ParamTable<T> buffers_;
};

// One-shot form: a fresh optimiser (no momentum history) applied once.
template <typename T>
void sgd_step(BasicClassifier<T>& model, const ParamGrads<T>& grads, double lr,
              double momentum, double weight_decay) {
  SgdOptimizer<T> opt(SgdOptions{lr, momentum, weight_decay});
  opt.step(model, grads);
}

}  // namespace unlearn
