#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cxr/errors.hpp"

namespace cxr {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array with value semantics.
///
/// Extents are strictly positive; 4-D tensors follow the NCHW convention.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    check_extents();
    values_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_extents();
    if (values_.size() != shape_size(shape_)) {
      throw ShapeError("tensor of shape " + shape_string(shape_) + " needs " +
                       std::to_string(shape_size(shape_)) + " values, got " +
                       std::to_string(values_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return values_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), values_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

  Tensor& operator+=(const Tensor& other) {
    if (other.shape_ != shape_) {
      throw ShapeError("cannot add " + shape_string(other.shape_) + " to " + shape_string(shape_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_extents() const {
    for (std::size_t e : shape_) {
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> values_;
};

}  // namespace cxr
