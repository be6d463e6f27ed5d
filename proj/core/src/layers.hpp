#pragma once

// Internal module tree for the two classifier architectures. Every module
// processes samples one at a time in the forward pass so a sample's output
// never depends on the rest of its batch (eval mode).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "unlearn/tensor.hpp"

namespace unlearn::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
struct Cache {
  std::vector<Tensor<T>> tensors;
  std::vector<std::uint32_t> indices;
  std::vector<Cache> children;
};

template <typename T>
struct Context {
  const ParamTable<T>& params;
  const ParamTable<T>* stats = nullptr;  // BN running stats read in eval mode
  ParamTable<T>* running = nullptr;      // BN running stats updated in train mode
  bool train = false;
  bool record = false;
  ParamTable<T>* grads = nullptr;
  std::vector<std::uint32_t>* pattern = nullptr;  // piecewise-linear branch record
};

enum class Init { zeros, ones, he_normal, lecun_normal };

// Registers parameters and buffers while a network is assembled. Without an
// rng every tensor is zero-filled (structure only).
template <typename T>
struct ParamBuilder {
  ParamTable<T>* params;
  ParamTable<T>* buffers;
  std::mt19937_64* rng;

  std::size_t add_param(const std::string& name, Shape shape, Init init,
                        std::size_t fan_in) {
    Tensor<T> t(std::move(shape));
    if (rng != nullptr) initialise(t, init, fan_in);
    params->add(name, std::move(t));
    return params->size() - 1;
  }

  std::size_t add_buffer(const std::string& name, Shape shape, T fill) {
    buffers->add(name, Tensor<T>(std::move(shape), fill));
    return buffers->size() - 1;
  }

 private:
  void initialise(Tensor<T>& t, Init init, std::size_t fan_in) {
    switch (init) {
      case Init::zeros:
        t.fill(T{0});
        return;
      case Init::ones:
        t.fill(T{1});
        return;
      case Init::he_normal:
      case Init::lecun_normal: {
        const double gain = init == Init::he_normal ? 2.0 : 1.0;
        std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
        for (auto& v : t.values()) v = static_cast<T>(dist(*rng));
        return;
      }
    }
  }
};

template <typename T>
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                            Cache<T>& cache) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy, Context<T>& ctx,
                             const Cache<T>& cache) const = 0;
};

template <typename T>
class Conv2d final : public Module<T> {
 public:
  Conv2d(ParamBuilder<T>& b, const std::string& name, std::size_t in,
         std::size_t out, std::size_t kernel, std::size_t stride,
         std::size_t pad, bool bias)
      : in_(in), out_(out), k_(kernel), stride_(stride), pad_(pad), has_bias_(bias) {
    const std::size_t fan_in = in * kernel * kernel;
    weight_ = b.add_param(name + ".weight", {out, in, kernel, kernel},
                          Init::he_normal, fan_in);
    if (bias) bias_ = b.add_param(name + ".bias", {out}, Init::zeros, fan_in);
  }

  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    const auto [batch, h, w] = check_input(x);
    const std::size_t ho = out_size(h), wo = out_size(w);
    const std::size_t cols = ho * wo, rows = in_ * k_ * k_;
    Tensor<T> y({batch, out_, ho, wo});
    AlignedVector<T> col(rows * cols);
    ConstMatMap<T> wmat(ctx.params[weight_].data(), out_, rows);
    for (std::size_t s = 0; s < batch; ++s) {
      im2col(x.data() + s * in_ * h * w, h, w, ho, wo, col.data());
      MatMap<T> ys(y.data() + s * out_ * cols, out_, cols);
      ys.noalias() = wmat * ConstMatMap<T>(col.data(), rows, cols);
      if (has_bias_) {
        const T* bvec = ctx.params[bias_].data();
        for (std::size_t o = 0; o < out_; ++o) ys.row(o).array() += bvec[o];
      }
    }
    if (ctx.record) cache.tensors = {x};
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, Context<T>& ctx,
                     const Cache<T>& cache) const override {
    const Tensor<T>& x = cache.tensors.at(0);
    const std::size_t batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = out_size(h), wo = out_size(w);
    const std::size_t cols = ho * wo, rows = in_ * k_ * k_;
    Tensor<T> dx(x.shape());
    AlignedVector<T> col(rows * cols), dcol(rows * cols);
    ConstMatMap<T> wmat(ctx.params[weight_].data(), out_, rows);
    MatMap<T> gw((*ctx.grads)[weight_].data(), out_, rows);
    for (std::size_t s = 0; s < batch; ++s) {
      ConstMatMap<T> dys(dy.data() + s * out_ * cols, out_, cols);
      im2col(x.data() + s * in_ * h * w, h, w, ho, wo, col.data());
      gw.noalias() += dys * ConstMatMap<T>(col.data(), rows, cols).transpose();
      if (has_bias_) {
        VecMap<T> gb((*ctx.grads)[bias_].data(), out_);
        gb += dys.rowwise().sum();
      }
      MatMap<T>(dcol.data(), rows, cols).noalias() = wmat.transpose() * dys;
      col2im(dcol.data(), h, w, ho, wo, dx.data() + s * in_ * h * w);
    }
    return dx;
  }

 private:
  std::size_t out_size(std::size_t n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }

  std::tuple<std::size_t, std::size_t, std::size_t> check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != in_ || x.dim(2) + 2 * pad_ < k_ ||
        x.dim(3) + 2 * pad_ < k_) {
      throw InputError("conv2d expects [B," + std::to_string(in_) +
                       ",H,W], got " + shape_to_string(x.shape()));
    }
    return {x.dim(0), x.dim(2), x.dim(3)};
  }

  // Valid output range [lo, hi) along one axis for kernel offset `offset`.
  std::pair<std::size_t, std::size_t> valid_range(std::size_t n, std::size_t no,
                                                  std::size_t offset) const {
    const auto p = static_cast<long>(pad_), s = static_cast<long>(stride_);
    const auto off = static_cast<long>(offset);
    long lo = p - off > 0 ? (p - off + s - 1) / s : 0;
    long hi = (static_cast<long>(n) - 1 + p - off);
    hi = hi < 0 ? 0 : hi / s + 1;
    lo = std::min<long>(lo, static_cast<long>(no));
    hi = std::min<long>(hi, static_cast<long>(no));
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
  }

  void im2col(const T* src, std::size_t h, std::size_t w, std::size_t ho,
              std::size_t wo, T* col) const {
    std::size_t row = 0;
    for (std::size_t c = 0; c < in_; ++c) {
      const T* plane = src + c * h * w;
      for (std::size_t ky = 0; ky < k_; ++ky) {
        const auto [ylo, yhi] = valid_range(h, ho, ky);
        for (std::size_t kx = 0; kx < k_; ++kx, ++row) {
          const auto [xlo, xhi] = valid_range(w, wo, kx);
          T* dst = col + row * ho * wo;
          std::fill(dst, dst + ho * wo, T{0});
          for (std::size_t oy = ylo; oy < yhi; ++oy) {
            const T* in_row = plane + (oy * stride_ + ky - pad_) * w;
            T* out_row = dst + oy * wo;
            for (std::size_t ox = xlo; ox < xhi; ++ox) {
              out_row[ox] = in_row[ox * stride_ + kx - pad_];
            }
          }
        }
      }
    }
  }

  void col2im(const T* col, std::size_t h, std::size_t w, std::size_t ho,
              std::size_t wo, T* dst) const {
    std::size_t row = 0;
    for (std::size_t c = 0; c < in_; ++c) {
      T* plane = dst + c * h * w;
      for (std::size_t ky = 0; ky < k_; ++ky) {
        const auto [ylo, yhi] = valid_range(h, ho, ky);
        for (std::size_t kx = 0; kx < k_; ++kx, ++row) {
          const auto [xlo, xhi] = valid_range(w, wo, kx);
          const T* srcrow = col + row * ho * wo;
          for (std::size_t oy = ylo; oy < yhi; ++oy) {
            T* out_row = plane + (oy * stride_ + ky - pad_) * w;
            const T* in_row = srcrow + oy * wo;
            for (std::size_t ox = xlo; ox < xhi; ++ox) {
              out_row[ox * stride_ + kx - pad_] += in_row[ox];
            }
          }
        }
      }
    }
  }

  std::size_t in_, out_, k_, stride_, pad_;
  bool has_bias_;
  std::size_t weight_ = 0, bias_ = 0;
};

template <typename T>
class BatchNorm2d final : public Module<T> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d(ParamBuilder<T>& b, const std::string& name, std::size_t channels)
      : channels_(channels) {
    weight_ = b.add_param(name + ".weight", {channels}, Init::ones, 1);
    bias_ = b.add_param(name + ".bias", {channels}, Init::zeros, 1);
    mean_ = b.add_buffer(name + ".running_mean", {channels}, T{0});
    var_ = b.add_buffer(name + ".running_var", {channels}, T{1});
  }

  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    if (x.rank() != 4 || x.dim(1) != channels_) {
      throw InputError("batchnorm expects [B," + std::to_string(channels_) +
                       ",H,W], got " + shape_to_string(x.shape()));
    }
    const std::size_t batch = x.dim(0), plane = x.dim(2) * x.dim(3);
    const std::size_t n = batch * plane;
    const T* gamma = ctx.params[weight_].data();
    const T* beta = ctx.params[bias_].data();
    Tensor<T> y(x.shape()), xhat(x.shape()), inv_std({channels_});
    for (std::size_t c = 0; c < channels_; ++c) {
      double mean, var;
      if (ctx.train) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
          const T* p = x.data() + (s * channels_ + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        mean = sum / static_cast<double>(n);
        for (std::size_t s = 0; s < batch; ++s) {
          const T* p = x.data() + (s * channels_ + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = p[i] - mean;
            sq += d * d;
          }
        }
        var = sq / static_cast<double>(n);
        if (ctx.running != nullptr) {
          T& rm = (*ctx.running)[mean_][c];
          T& rv = (*ctx.running)[var_][c];
          const double unbiased = n > 1 ? sq / static_cast<double>(n - 1) : var;
          rm = static_cast<T>((1.0 - kMomentum) * rm + kMomentum * mean);
          rv = static_cast<T>((1.0 - kMomentum) * rv + kMomentum * unbiased);
        }
      } else {
        mean = static_cast<double>((*ctx.stats)[mean_][c]);
        var = static_cast<double>((*ctx.stats)[var_][c]);
      }
      const T istd = static_cast<T>(1.0 / std::sqrt(var + kEps));
      inv_std[c] = istd;
      const T m = static_cast<T>(mean);
      for (std::size_t s = 0; s < batch; ++s) {
        const std::size_t off = (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T xh = (x[off + i] - m) * istd;
          xhat[off + i] = xh;
          y[off + i] = gamma[c] * xh + beta[c];
        }
      }
    }
    if (ctx.record) cache.tensors = {std::move(xhat), std::move(inv_std)};
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, Context<T>& ctx,
                     const Cache<T>& cache) const override {
    const Tensor<T>& xhat = cache.tensors.at(0);
    const Tensor<T>& inv_std = cache.tensors.at(1);
    const std::size_t batch = dy.dim(0), plane = dy.dim(2) * dy.dim(3);
    const double n = static_cast<double>(batch * plane);
    const T* gamma = ctx.params[weight_].data();
    T* gg = (*ctx.grads)[weight_].data();
    T* gb = (*ctx.grads)[bias_].data();
    Tensor<T> dx(dy.shape());
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t s = 0; s < batch; ++s) {
        const std::size_t off = (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += dy[off + i];
          sum_dy_xhat += static_cast<double>(dy[off + i]) * xhat[off + i];
        }
      }
      gg[c] += static_cast<T>(sum_dy_xhat);
      gb[c] += static_cast<T>(sum_dy);
      const T scale = gamma[c] * inv_std[c];
      const T mean_dy = static_cast<T>(sum_dy / n);
      const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / n);
      for (std::size_t s = 0; s < batch; ++s) {
        const std::size_t off = (s * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          dx[off + i] = ctx.train
                            ? scale * (dy[off + i] - mean_dy - xhat[off + i] * mean_dy_xhat)
                            : scale * dy[off + i];
        }
      }
    }
    return dx;
  }

  std::size_t channels_;
  std::size_t weight_ = 0, bias_ = 0, mean_ = 0, var_ = 0;
};

template <typename T>
class ReLU final : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] < T{0} ? T{0} : x[i];  // NaN passes through
    if (ctx.pattern != nullptr) {
      for (std::size_t i = 0; i < x.size(); ++i) ctx.pattern->push_back(x[i] > T{0});
    }
    if (ctx.record) cache.tensors = {y};
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, Context<T>&,
                     const Cache<T>& cache) const override {
    const Tensor<T>& y = cache.tensors.at(0);
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > T{0} ? dy[i] : T{0};
    return dx;
  }
};

// 2x2 window, stride 2. Ties resolve to the first element in scan order.
template <typename T>
class MaxPool2 final : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    if (x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2) {
      throw InputError("maxpool expects [B,C,H>=2,W>=2], got " + shape_to_string(x.shape()));
    }
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = h / 2, wo = w / 2;
    Tensor<T> y({x.dim(0), x.dim(1), ho, wo});
    std::vector<std::uint32_t> arg;
    if (ctx.record) arg.resize(y.size());
    for (std::size_t p = 0; p < planes; ++p) {
      const T* in = x.data() + p * h * w;
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          std::size_t best = (2 * oy) * w + 2 * ox;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (2 * oy + dy) * w + 2 * ox + dx;
              if (in[idx] > in[best]) best = idx;
            }
          }
          const std::size_t o = p * ho * wo + oy * wo + ox;
          y[o] = in[best];
          if (ctx.record) arg[o] = static_cast<std::uint32_t>(best);
          if (ctx.pattern != nullptr) ctx.pattern->push_back(static_cast<std::uint32_t>(best));
        }
      }
    }
    if (ctx.record) {
      cache.indices = std::move(arg);
      cache.indices.push_back(static_cast<std::uint32_t>(h));
      cache.indices.push_back(static_cast<std::uint32_t>(w));
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, Context<T>&,
                     const Cache<T>& cache) const override {
    const std::size_t n = cache.indices.size();
    const std::size_t h = cache.indices[n - 2], w = cache.indices[n - 1];
    const std::size_t planes = dy.dim(0) * dy.dim(1);
    const std::size_t out_plane = dy.dim(2) * dy.dim(3);
    Tensor<T> dx({dy.dim(0), dy.dim(1), h, w});
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < out_plane; ++i) {
        const std::size_t o = p * out_plane + i;
        dx[p * h * w + cache.indices[o]] += dy[o];
      }
    }
    return dx;
  }
};

template <typename T>
class GlobalAvgPool final : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    if (x.rank() != 4) throw InputError("global pool expects rank-4 input");
    const std::size_t rows = x.dim(0) * x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor<T> y({x.dim(0), x.dim(1)});
    for (std::size_t r = 0; r < rows; ++r) {
      T sum{0};
      for (std::size_t i = 0; i < plane; ++i) sum += x[r * plane + i];
      y[r] = sum / static_cast<T>(plane);
    }
    if (ctx.record) {
      cache.indices = {static_cast<std::uint32_t>(x.dim(2)),
                       static_cast<std::uint32_t>(x.dim(3))};
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, Context<T>&,
                     const Cache<T>& cache) const override {
    const std::size_t h = cache.indices.at(0), w = cache.indices.at(1);
    Tensor<T> dx({dy.dim(0), dy.dim(1), h, w});
    const T scale = T{1} / static_cast<T>(h * w);
    for (std::size_t r = 0; r < dy.size(); ++r) {
      for (std::size_t i = 0; i < h * w; ++i) dx[r * h * w + i] = dy[r] * scale;
    }
    return dx;
  }
};

template <typename T>
class Flatten final : public Module<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    if (ctx.record) {
      cache.indices.clear();
      for (auto d : x.shape()) cache.indices.push_back(static_cast<std::uint32_t>(d));
    }
    return x.reshaped({x.dim(0), x.row_size()});
  }
  Tensor<T> backward(const Tensor<T>& dy, Context<T>&,
                     const Cache<T>& cache) const override {
    Shape shape(cache.indices.begin(), cache.indices.end());
    return dy.reshaped(std::move(shape));
  }
};

template <typename T>
class Linear final : public Module<T> {
 public:
  Linear(ParamBuilder<T>& b, const std::string& name, std::size_t in,
         std::size_t out, Init init)
      : in_(in), out_(out) {
    weight_ = b.add_param(name + ".weight", {out, in}, init, in);
    bias_ = b.add_param(name + ".bias", {out}, Init::zeros, in);
  }

  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    if (x.rank() != 2 || x.dim(1) != in_) {
      throw InputError("linear expects [B," + std::to_string(in_) + "], got " +
                       shape_to_string(x.shape()));
    }
    const std::size_t batch = x.dim(0);
    Tensor<T> y({batch, out_});
    ConstMatMap<T> wmat(ctx.params[weight_].data(), out_, in_);
    ConstVecMap<T> bvec(ctx.params[bias_].data(), out_);
    for (std::size_t s = 0; s < batch; ++s) {
      VecMap<T>(y.data() + s * out_, out_).noalias() =
          wmat * ConstVecMap<T>(x.data() + s * in_, in_) + bvec;
    }
    if (ctx.record) cache.tensors = {x};
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, Context<T>& ctx,
                     const Cache<T>& cache) const override {
    const Tensor<T>& x = cache.tensors.at(0);
    const std::size_t batch = x.dim(0);
    ConstMatMap<T> dymat(dy.data(), batch, out_);
    ConstMatMap<T> xmat(x.data(), batch, in_);
    MatMap<T>((*ctx.grads)[weight_].data(), out_, in_).noalias() += dymat.transpose() * xmat;
    VecMap<T>((*ctx.grads)[bias_].data(), out_) += dymat.colwise().sum().transpose();
    Tensor<T> dx({batch, in_});
    MatMap<T>(dx.data(), batch, in_).noalias() =
        dymat * ConstMatMap<T>(ctx.params[weight_].data(), out_, in_);
    return dx;
  }

 private:
  std::size_t in_, out_;
  std::size_t weight_ = 0, bias_ = 0;
};

template <typename T>
class Sequential final : public Module<T> {
 public:
  template <typename M, typename... Args>
  M& add(Args&&... args) {
    auto m = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *m;
    modules_.push_back(std::move(m));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    cache.children.resize(modules_.size());
    Tensor<T> h = modules_.front()->forward(x, ctx, cache.children[0]);
    for (std::size_t i = 1; i < modules_.size(); ++i) {
      h = modules_[i]->forward(h, ctx, cache.children[i]);
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& dy, Context<T>& ctx,
                     const Cache<T>& cache) const override {
    Tensor<T> d = dy;
    for (std::size_t i = modules_.size(); i-- > 0;) {
      d = modules_[i]->backward(d, ctx, cache.children[i]);
    }
    return d;
  }

  const std::vector<std::unique_ptr<Module<T>>>& modules() const { return modules_; }

 private:
  std::vector<std::unique_ptr<Module<T>>> modules_;
};

// ResNet basic block: relu(bn(conv(relu(bn(conv(x))))) + shortcut(x)).
template <typename T>
class BasicBlock final : public Module<T> {
 public:
  BasicBlock(ParamBuilder<T>& b, const std::string& name, std::size_t in,
             std::size_t out, std::size_t stride) {
    main_.template add<Conv2d<T>>(b, name + ".conv1", in, out, 3, stride, 1, false);
    main_.template add<BatchNorm2d<T>>(b, name + ".bn1", out);
    main_.template add<ReLU<T>>();
    main_.template add<Conv2d<T>>(b, name + ".conv2", out, out, 3, 1, 1, false);
    main_.template add<BatchNorm2d<T>>(b, name + ".bn2", out);
    if (stride != 1 || in != out) {
      shortcut_ = std::make_unique<Sequential<T>>();
      shortcut_->template add<Conv2d<T>>(b, name + ".shortcut.conv", in, out, 1,
                                         stride, 0, false);
      shortcut_->template add<BatchNorm2d<T>>(b, name + ".shortcut.bn", out);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Context<T>& ctx,
                    Cache<T>& cache) const override {
    cache.children.resize(2);
    Tensor<T> y = main_.forward(x, ctx, cache.children[0]);
    if (shortcut_) {
      const Tensor<T> s = shortcut_->forward(x, ctx, cache.children[1]);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += s[i];
    } else {
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    }
    if (ctx.pattern != nullptr) {
      for (const T v : y.values()) ctx.pattern->push_back(v > T{0});
    }
    for (auto& v : y.values()) v = v < T{0} ? T{0} : v;
    if (ctx.record) cache.tensors = {y};
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, Context<T>& ctx,
                     const Cache<T>& cache) const override {
    const Tensor<T>& y = cache.tensors.at(0);
    Tensor<T> d(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] = y[i] > T{0} ? dy[i] : T{0};
    Tensor<T> dx = main_.backward(d, ctx, cache.children[0]);
    if (shortcut_) {
      const Tensor<T> ds = shortcut_->backward(d, ctx, cache.children[1]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
    } else {
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d[i];
    }
    return dx;
  }

 private:
  Sequential<T> main_;
  std::unique_ptr<Sequential<T>> shortcut_;
};

}  // namespace unlearn::detail
