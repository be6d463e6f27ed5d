#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unlearn/errors.hpp"

namespace unlearn {

using Shape = std::vector<std::size_t>;

// Cache-line aligned storage. Vectorised kernels pick their summation order
// from the buffer address, so a fixed alignment keeps results reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

// Dense row-major array. Value semantics; copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, const std::vector<T>& data)
      : Tensor(std::move(shape), AlignedVector<T>(data.begin(), data.end())) {}
  Tensor(Shape shape, std::initializer_list<T> data)
      : Tensor(std::move(shape), AlignedVector<T>(data)) {}
  Tensor(Shape shape, AlignedVector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw UsageError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  AlignedVector<T>& storage() { return data_; }
  const AlignedVector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Element count of one slice along the leading axis.
  std::size_t row_size() const {
    return shape_.empty() ? 0 : data_.size() / shape_[0];
  }
  std::span<T> row(std::size_t i) {
    return std::span<T>(data_).subspan(i * row_size(), row_size());
  }
  std::span<const T> row(std::size_t i) const {
    return std::span<const T>(data_).subspan(i * row_size(), row_size());
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }
  Tensor reshaped(Shape shape) && {
    return Tensor(std::move(shape), std::move(data_));
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, AlignedVector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

// Ordered name -> tensor table. Order is insertion order and is part of the
// model contract (checkpoint layout, saliency ranking ties).
template <typename T>
class ParamTable {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  void add(std::string name, Tensor<T> value) {
    if (find(name) != npos) throw UsageError("duplicate parameter name: " + name);
    entries_.push_back({std::move(name), std::move(value)});
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name == name) return i;
    }
    return npos;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  Entry& entry(std::size_t i) { return entries_.at(i); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Tensor<T>& operator[](std::size_t i) { return entries_[i].value; }
  const Tensor<T>& operator[](std::size_t i) const { return entries_[i].value; }

  Tensor<T>& at(const std::string& name) {
    const auto i = find(name);
    if (i == npos) throw UsageError("unknown parameter name: " + name);
    return entries_[i].value;
  }
  const Tensor<T>& at(const std::string& name) const {
    const auto i = find(name);
    if (i == npos) throw UsageError("unknown parameter name: " + name);
    return entries_[i].value;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  // Same names in the same order with identical shapes.
  template <typename U>
  bool congruent_with(const ParamTable<U>& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (entries_[i].name != other.entry(i).name ||
          entries_[i].value.shape() != other.entry(i).value.shape()) {
        return false;
      }
    }
    return true;
  }

  template <typename U>
  static ParamTable filled_like(const ParamTable<U>& other, T value) {
    ParamTable out;
    for (const auto& e : other) out.add(e.name, Tensor<T>(e.value.shape(), value));
    return out;
  }

  template <typename U>
  ParamTable<U> cast() const {
    ParamTable<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

  friend bool operator==(const ParamTable& a, const ParamTable& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name ||
          !(a.entries_[i].value == b.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace unlearn
