#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dcnn/error.hpp"
#include "dcnn/rng.hpp"

namespace dcnn {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);
/// Throws ShapeError when the shape is empty or has a zero extent.
void check_shape(const Shape& shape);

/// Dense row-major tensor. Shapes are ordered [channels, height, width] with
/// the batch dimension leading where present. A default-constructed tensor
/// is an empty placeholder (no shape, no data).
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  Real* raw() noexcept { return data_.data(); }
  const Real* raw() const noexcept { return data_.data(); }

  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  const Real& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... Idx>
  Real& operator()(Idx... idx) noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }
  template <typename... Idx>
  const Real& operator()(Idx... idx) const noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }

  /// Same data under a new shape with equal element count.
  BasicTensor reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  /// Contiguous slice along the leading axis, e.g. one image of a batch.
  BasicTensor slice(std::size_t index) const {
    Shape inner(shape_.begin() + 1, shape_.end());
    if (inner.empty()) inner.push_back(1);
    const std::size_t n = shape_size(inner);
    return BasicTensor(
        inner, std::vector<Real>(data_.begin() + index * n,
                                 data_.begin() + (index + 1) * n));
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_,
                              std::vector<Other>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(std::size_t i) const noexcept { return i; }
  std::size_t offset(std::size_t i, std::size_t j) const noexcept {
    return i * shape_[1] + j;
  }
  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return (i * shape_[1] + j) * shape_[2] + k;
  }
  std::size_t offset(std::size_t i, std::size_t j, std::size_t k,
                     std::size_t l) const noexcept {
    return ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
  }

  Shape shape_;
  std::vector<Real> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

/// I.i.d. standard normal entries drawn from `rng`.
template <typename Real = double>
BasicTensor<Real> gaussian_fill(const Shape& shape, SeededRng& rng);

/// Sum of elementwise products of two same-shape tensors.
template <typename Real>
Real flat_inner(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

template <typename Real>
Real l2_norm(const BasicTensor<Real>& a);

/// Shifts the last two (spatial) axes by `dx` columns and `dy` rows; leading
/// axes move rigidly. Positive shifts move content toward larger indices,
/// vacated cells are zero.
template <typename Real>
BasicTensor<Real> translate(const BasicTensor<Real>& w, long dx, long dy);

/// max |a - b| over all elements; shapes must match.
template <typename Real>
double max_abs_diff(const BasicTensor<Real>& a, const BasicTensor<Real>& b);

}  // namespace dcnn
