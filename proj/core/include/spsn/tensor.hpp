#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "spsn/errors.hpp"

namespace spsn {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kTensorAlignment = 64;

/// Every buffer starts on a kTensorAlignment boundary, so vectorised kernels
/// take the same code path (and rounding) regardless of where the heap put it.
template <typename T>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kTensorAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t{kTensorAlignment});
  }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename Real>
using AlignedVector = std::vector<Real, AlignedAllocator<Real>>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
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

/// Dense row-major tensor. Rank-3 tensors in this library are laid out
/// [time x batch x channels] so that time is the outermost axis.
template <typename Real>
class Tensor {
public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(Shape shape, Real fill = Real{0})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, AlignedVector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_length();
  }

  Tensor(Shape shape, const std::vector<Real>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_length();
  }

  static Tensor scalar(Real v) { return Tensor(Shape{}, AlignedVector<Real>{v}); }


  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  AlignedVector<Real>& storage() noexcept { return data_; }
  const AlignedVector<Real>& storage() const noexcept { return data_; }
  std::vector<Real> to_vector() const { return {data_.begin(), data_.end()}; }

  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  const Real& operator[](std::size_t i) const noexcept { return data_[i]; }

  Real& at(std::size_t t, std::size_t b, std::size_t n) {
    return data_[(t * shape_[1] + b) * shape_[2] + n];
  }
  const Real& at(std::size_t t, std::size_t b, std::size_t n) const {
    return data_[(t * shape_[1] + b) * shape_[2] + n];
  }

  Real item() const {
    if (data_.size() != 1) {
      throw DataError(DataErrorKind::ShapeMismatch,
                      "item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](Real v) { return std::isfinite(v); });
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  Real sum() const { return std::accumulate(data_.begin(), data_.end(), Real{0}); }

  bool operator==(const Tensor& other) const = default;

private:
  void check_length() const {
    if (shape_size(shape_) != data_.size()) {
      throw DataError(DataErrorKind::ShapeMismatch,
                      "tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  AlignedVector<Real> data_;
};

inline void require_shape(const Shape& got, const Shape& want, const char* what) {
  if (got != want) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    std::string(what) + ": expected shape " + shape_string(want) +
                        ", got " + shape_string(got));
  }
}

template <typename Real>
void require_finite(const Tensor<Real>& t, const char* what) {
  if (!t.all_finite()) {
    throw NumericError(std::string(what) + ": non-finite value");
  }
}

}  // namespace spsn
