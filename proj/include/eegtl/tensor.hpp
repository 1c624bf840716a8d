#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "eegtl/error.hpp"

namespace eegtl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

/// Dense row-major array with an optional same-sized gradient buffer.
///
/// The library runs in float32; the double instantiation exists so that the
/// finite-difference checks can evaluate the same code path at higher
/// precision.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor of shape " + shape_to_string(shape_) + " needs " +
                       std::to_string(shape_size(shape_)) + " elements, got " +
                       std::to_string(data_.size()));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<T> data)
      : BasicTensor(std::move(shape), std::vector<T>(data)) {}

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool has_grad() const { return !grad_.empty(); }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }

  /// Allocates the gradient buffer (zero-filled) if absent.
  void ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), T{0});
  }
  void zero_grad() { grad_.assign(data_.size(), T{0}); }
  void drop_grad() { grad_.clear(); }

  /// Same data, new extents with equal element count.
  BasicTensor reshaped(Shape shape) const {
    BasicTensor out(std::move(shape), data_);
    return out;
  }

  template <class U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    for (std::size_t extent : shape_) {
      if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
};

using Tensor = BasicTensor<float>;

/// Bitwise comparison of the stored values (distinguishes -0.0f and NaN payloads).
bool bit_identical(const Tensor& a, const Tensor& b);

}  // namespace eegtl
