#include "unlearn/model.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "layers.hpp"

namespace unlearn {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::small_cnn:
      return "small-cnn";
    case Architecture::resnet18_cifar:
      return "resnet18-cifar";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "small-cnn") return Architecture::small_cnn;
  if (name == "resnet18-cifar") return Architecture::resnet18_cifar;
  throw ConfigError("unknown architecture: " + std::string(name));
}

ArchitectureSpec ArchitectureSpec::small_cnn(int num_classes) {
  return {Architecture::small_cnn, num_classes, 128, 32};
}

ArchitectureSpec ArchitectureSpec::resnet18_cifar(int num_classes) {
  return {Architecture::resnet18_cifar, num_classes, 512, 64};
}

void ArchitectureSpec::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (base_width < 1) throw ConfigError("base_width must be >= 1");
  if (name == Architecture::resnet18_cifar && feature_dim != 8 * base_width) {
    throw ConfigError("resnet18-cifar feature_dim must equal 8 * base_width");
  }
}

void SgdOptions::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
}

namespace {

std::uint64_t next_model_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

}  // namespace

template <typename T>
class ForwardTrace {
 public:
  std::uint64_t model_id = 0;
  std::uint64_t version = 0;
  bool train = false;
  detail::Cache<T> body;
  detail::Cache<T> head;
  Tensor<T> normalized;
  std::vector<T> norms;
  std::size_t batch = 0;
};

template <typename T>
struct BasicClassifier<T>::Network {
  detail::Sequential<T> body;
  std::unique_ptr<detail::Linear<T>> head;
};

namespace {

constexpr double kNormEps = 1e-12;

template <typename T>
void build_small_cnn(detail::Sequential<T>& body, detail::ParamBuilder<T>& b,
                     const ArchitectureSpec& spec) {
  using namespace detail;
  const auto w = static_cast<std::size_t>(spec.base_width);
  body.template add<Conv2d<T>>(b, "conv1", kImageChannels, w, 3, 1, 1, true);
  body.template add<ReLU<T>>();
  body.template add<Conv2d<T>>(b, "conv2", w, w, 3, 1, 1, true);
  body.template add<MaxPool2<T>>();
  body.template add<Conv2d<T>>(b, "conv3", w, 2 * w, 3, 1, 1, true);
  body.template add<ReLU<T>>();
  body.template add<Conv2d<T>>(b, "conv4", 2 * w, 2 * w, 3, 1, 1, true);
  body.template add<MaxPool2<T>>();
  body.template add<Flatten<T>>();
  const std::size_t flat = 2 * w * (kImageSide / 4) * (kImageSide / 4);
  body.template add<Linear<T>>(b, "fc", flat, static_cast<std::size_t>(spec.feature_dim),
                               Init::he_normal);
  body.template add<ReLU<T>>();
}

template <typename T>
void build_resnet18(detail::Sequential<T>& body, detail::ParamBuilder<T>& b,
                    const ArchitectureSpec& spec) {
  using namespace detail;
  const auto w = static_cast<std::size_t>(spec.base_width);
  body.template add<Conv2d<T>>(b, "conv1", kImageChannels, w, 3, 1, 1, false);
  body.template add<BatchNorm2d<T>>(b, "bn1", w);
  body.template add<ReLU<T>>();
  std::size_t in = w;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const std::size_t out = w << stage;
    for (std::size_t block = 0; block < 2; ++block) {
      const std::size_t stride = (stage > 0 && block == 0) ? 2 : 1;
      body.template add<BasicBlock<T>>(
          b, "layer" + std::to_string(stage + 1) + "." + std::to_string(block), in,
          out, stride);
      in = out;
    }
  }
  body.template add<GlobalAvgPool<T>>();
}

}  // namespace

template <typename T>
BasicClassifier<T>::BasicClassifier(ArchitectureSpec spec, std::uint64_t seed,
                                    std::nullptr_t)
    : spec_(spec), seed_(seed), id_(next_model_id()) {
  spec_.validate();
}

template <typename T>
BasicClassifier<T>::BasicClassifier(ArchitectureSpec spec, std::uint64_t seed)
    : BasicClassifier(spec, seed, nullptr) {
  std::mt19937_64 rng(seed);
  detail::ParamBuilder<T> builder{&params_, &buffers_, &rng};
  auto net = std::make_shared<Network>();
  if (spec_.name == Architecture::small_cnn) {
    build_small_cnn(net->body, builder, spec_);
  } else {
    build_resnet18(net->body, builder, spec_);
  }
  net->head = std::make_unique<detail::Linear<T>>(
      builder, "head", static_cast<std::size_t>(spec_.feature_dim),
      static_cast<std::size_t>(spec_.num_classes), detail::Init::lecun_normal);
  net_ = std::move(net);
}

template <typename T>
BasicClassifier<T> BasicClassifier<T>::from_tables(ArchitectureSpec spec,
                                                   std::uint64_t seed,
                                                   ParamTable<T> params,
                                                   ParamTable<T> buffers) {
  BasicClassifier model(spec, seed, nullptr);
  ParamTable<T> ref_params, ref_buffers;
  detail::ParamBuilder<T> builder{&ref_params, &ref_buffers, nullptr};
  auto net = std::make_shared<Network>();
  if (spec.name == Architecture::small_cnn) {
    build_small_cnn(net->body, builder, model.spec_);
  } else {
    build_resnet18(net->body, builder, model.spec_);
  }
  net->head = std::make_unique<detail::Linear<T>>(
      builder, "head", static_cast<std::size_t>(spec.feature_dim),
      static_cast<std::size_t>(spec.num_classes), detail::Init::lecun_normal);
  if (!params.congruent_with(ref_params)) {
    throw InputError("parameter table does not match architecture " + to_string(spec.name));
  }
  if (!buffers.congruent_with(ref_buffers)) {
    throw InputError("buffer table does not match architecture " + to_string(spec.name));
  }
  model.params_ = std::move(params);
  model.buffers_ = std::move(buffers);
  model.net_ = std::move(net);
  return model;
}

template <typename T>
BasicClassifier<T>::BasicClassifier(const BasicClassifier& other)
    : spec_(other.spec_),
      seed_(other.seed_),
      mode_(other.mode_),
      params_(other.params_),
      buffers_(other.buffers_),
      net_(other.net_),
      id_(next_model_id()),
      version_(0) {}

template <typename T>
BasicClassifier<T>& BasicClassifier<T>::operator=(const BasicClassifier& other) {
  if (this != &other) {
    spec_ = other.spec_;
    seed_ = other.seed_;
    mode_ = other.mode_;
    params_ = other.params_;
    buffers_ = other.buffers_;
    net_ = other.net_;
    ++version_;
  }
  return *this;
}

template <typename T>
BasicClassifier<T>::~BasicClassifier() = default;

template <typename T>
ForwardResult<T> BasicClassifier<T>::forward(const Tensor<T>& batch, bool record) {
  const bool train = mode_ == Mode::train;
  return run(batch, train, record, train ? &buffers_ : nullptr);
}

template <typename T>
ForwardResult<T> BasicClassifier<T>::infer(const Tensor<T>& batch, bool record) const {
  return run(batch, false, record, nullptr);
}

template <typename T>
std::vector<std::uint32_t> BasicClassifier<T>::activation_pattern(const Tensor<T>& batch) const {
  std::vector<std::uint32_t> pattern;
  run(batch, mode_ == Mode::train, false, nullptr, &pattern);
  return pattern;
}

template <typename T>
ForwardResult<T> BasicClassifier<T>::run(const Tensor<T>& batch, bool train, bool record,
                                         ParamTable<T>* running_stats,
                                         std::vector<std::uint32_t>* pattern) const {
  if (batch.rank() != 4 || batch.dim(0) == 0 || batch.dim(1) != kImageChannels ||
      batch.dim(2) != kImageSide || batch.dim(3) != kImageSide) {
    throw InputError("expected image batch [B,3,32,32] with B >= 1, got " +
                     shape_to_string(batch.shape()));
  }
  for (const T v : batch.values()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in input batch");
  }
  detail::Context<T> ctx{params_, &buffers_, running_stats, train, record, nullptr, pattern};
  auto trace = std::make_shared<ForwardTrace<T>>();
  Tensor<T> features = net_->body.forward(batch, ctx, trace->body);
  Tensor<T> logits = net_->head->forward(features, ctx, trace->head);
  for (const T v : logits.values()) {
    if (!std::isfinite(v)) throw NumericError("non-finite logits in forward pass");
  }

  const std::size_t n = features.dim(0), d = features.dim(1);
  Tensor<T> normalized({n, d});
  std::vector<T> norms(n);
  for (std::size_t s = 0; s < n; ++s) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += static_cast<double>(features[s * d + j]) * features[s * d + j];
    const T norm = static_cast<T>(std::max(std::sqrt(sq), kNormEps));
    norms[s] = norm;
    for (std::size_t j = 0; j < d; ++j) normalized[s * d + j] = features[s * d + j] / norm;
  }

  ForwardResult<T> result{std::move(logits), normalized, nullptr};
  if (record) {
    trace->model_id = id_;
    trace->version = version_;
    trace->train = train;
    trace->normalized = std::move(normalized);
    trace->norms = std::move(norms);
    trace->batch = n;
    result.trace = std::move(trace);
  }
  return result;
}

template <typename T>
ParamGrads<T> BasicClassifier<T>::backward(const Objective<T>& objective) const {
  if (!objective.trace_ && !objective.direct_) {
    throw UsageError("loss is not connected to model parameters");
  }
  ParamGrads<T> grads = ParamGrads<T>::filled_like(params_, T{0});
  if (objective.trace_) {
    const ForwardTrace<T>& trace = *objective.trace_;
    if (trace.model_id != id_ || trace.version != version_) {
      throw UsageError("loss was not produced from this model's current parameters");
    }
    const std::size_t n = trace.batch, d = static_cast<std::size_t>(spec_.feature_dim);
    detail::Context<T> ctx{params_, &buffers_, nullptr, trace.train, false, &grads};
    Tensor<T> d_raw({n, d});
    if (!objective.d_logits_.empty()) {
      d_raw = net_->head->backward(objective.d_logits_, ctx, trace.head);
    }
    if (!objective.d_features_.empty()) {
      // u = f/|f|  =>  df = (du - u (u.du)) / |f|
      for (std::size_t s = 0; s < n; ++s) {
        const T* u = trace.normalized.data() + s * d;
        const T* du = objective.d_features_.data() + s * d;
        T dot{0};
        for (std::size_t j = 0; j < d; ++j) dot += u[j] * du[j];
        for (std::size_t j = 0; j < d; ++j) {
          d_raw[s * d + j] += (du[j] - u[j] * dot) / trace.norms[s];
        }
      }
    }
    net_->body.backward(d_raw, ctx, trace.body);
  }
  if (objective.direct_) {
    if (objective.direct_model_id_ != id_ || objective.direct_version_ != version_) {
      throw UsageError("loss was not produced from this model's current parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const auto& src = (*objective.direct_)[i];
      for (std::size_t j = 0; j < src.size(); ++j) grads[i][j] += src[j];
    }
  }
  return grads;
}

template <typename T>
Objective<T> Objective<T>::on_logits(const ForwardResult<T>& fwd, double value,
                                     Tensor<T> d_logits) {
  if (!fwd.trace) throw UsageError("forward pass was not recorded; cannot differentiate");
  if (d_logits.shape() != fwd.logits.shape()) {
    throw UsageError("logit gradient shape " + shape_to_string(d_logits.shape()) +
                     " does not match logits " + shape_to_string(fwd.logits.shape()));
  }
  Objective obj;
  obj.value_ = value;
  obj.trace_ = fwd.trace;
  obj.d_logits_ = std::move(d_logits);
  return obj;
}

template <typename T>
Objective<T> Objective<T>::on_features(const ForwardResult<T>& fwd, double value,
                                       Tensor<T> d_features) {
  if (!fwd.trace) throw UsageError("forward pass was not recorded; cannot differentiate");
  if (d_features.shape() != fwd.features.shape()) {
    throw UsageError("feature gradient shape " + shape_to_string(d_features.shape()) +
                     " does not match features " + shape_to_string(fwd.features.shape()));
  }
  Objective obj;
  obj.value_ = value;
  obj.trace_ = fwd.trace;
  obj.d_features_ = std::move(d_features);
  return obj;
}

template <typename T>
Objective<T> Objective<T>::parameter_sum(const BasicClassifier<T>& model, T scale) {
  Objective obj;
  double total = 0.0;
  for (const auto& e : model.params()) {
    for (const T v : e.value.values()) total += v;
  }
  obj.value_ = static_cast<double>(scale) * total;
  obj.direct_ = ParamTable<T>::filled_like(model.params(), scale);
  obj.direct_model_id_ = model.identity();
  obj.direct_version_ = model.version();
  return obj;
}

template <typename T>
Objective<T>& Objective<T>::operator+=(const Objective& other) {
  if (trace_ && other.trace_ && trace_ != other.trace_) {
    throw UsageError("cannot combine losses from different forward passes");
  }
  auto add_into = [](Tensor<T>& dst, const Tensor<T>& src) {
    if (src.empty()) return;
    if (dst.empty()) {
      dst = src;
      return;
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  value_ += other.value_;
  if (!trace_) trace_ = other.trace_;
  add_into(d_logits_, other.d_logits_);
  add_into(d_features_, other.d_features_);
  if (other.direct_) {
    if (!direct_) {
      direct_ = other.direct_;
      direct_model_id_ = other.direct_model_id_;
      direct_version_ = other.direct_version_;
    } else {
      for (std::size_t i = 0; i < direct_->size(); ++i) add_into((*direct_)[i], (*other.direct_)[i]);
    }
  }
  return *this;
}

template <typename T>
BasicClassifier<T> build_classifier(const ArchitectureSpec& spec, std::int64_t seed) {
  if (seed < 0) throw ConfigError("seed must be >= 0");
  return BasicClassifier<T>(spec, static_cast<std::uint64_t>(seed));
}

template <typename T>
SgdOptimizer<T>::SgdOptimizer(SgdOptions options) : options_(options) {
  options_.validate();
}

template <typename T>
void SgdOptimizer<T>::set_lr(double lr) {
  SgdOptions next = options_;
  next.lr = lr;
  next.validate();
  options_ = next;
}

template <typename T>
void SgdOptimizer<T>::step(BasicClassifier<T>& model, const ParamGrads<T>& grads) {
  if (!grads.congruent_with(model.params())) {
    throw UsageError("gradients are not congruent with model parameters");
  }
  const T lr = static_cast<T>(options_.lr);
  const T momentum = static_cast<T>(options_.momentum);
  const T wd = static_cast<T>(options_.weight_decay);
  const bool use_momentum = options_.momentum != 0.0;
  const bool first = buffers_.empty();
  if (use_momentum && !first && !buffers_.congruent_with(model.params())) {
    throw UsageError("momentum buffers belong to a different model");
  }
  if (use_momentum && first) buffers_ = ParamTable<T>::filled_like(model.params(), T{0});

  ParamTable<T>& params = model.mutable_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& w = params[i];
    const Tensor<T>& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      T d = g[j];
      if (wd != T{0}) d += wd * w[j];
      if (use_momentum) {
        T& buf = buffers_[i][j];
        buf = first ? d : momentum * buf + d;
        d = buf;
      }
      w[j] -= lr * d;
    }
  }
}

template class BasicClassifier<float>;
template class BasicClassifier<double>;
template class Objective<float>;
template class Objective<double>;
template class SgdOptimizer<float>;
template class SgdOptimizer<double>;
template BasicClassifier<float> build_classifier<float>(const ArchitectureSpec&, std::int64_t);
template BasicClassifier<double> build_classifier<double>(const ArchitectureSpec&, std::int64_t);

}  // namespace unlearn
