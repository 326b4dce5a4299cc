#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nwadapt/error.hpp"
#include "nwadapt/rng.hpp"

namespace nwadapt {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

std::string shape_string(const Shape& shape);

// Throws invalid_shape for an empty list, a zero extent or rank > 4.
void validate_shape(const Shape& shape);

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense row-major array. Activations are N x C x H x W, conv weights
// K x C x kh x kw, dense weights out x in. `Real` is float for training and
// inference; double is used by the gradient and convolution checks.
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_size(shape_), Real{0});
  }

  BasicTensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_size(shape_)) {
      fail(ErrorKind::invalid_shape, "tensor data length " + std::to_string(data_.size()) +
                                         " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }
  Real* raw() noexcept { return data_.data(); }
  const Real* raw() const noexcept { return data_.data(); }
  const std::vector<Real>& values() const noexcept { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  // Flat offset of a full coordinate; ((n*C + c)*H + h)*W + w for rank 4.
  std::size_t offset(std::span<const std::size_t> coord) const {
    std::size_t flat = 0;
    for (std::size_t axis = 0; axis < shape_.size(); ++axis) flat = flat * shape_[axis] + coord[axis];
    return flat;
  }

  Shape coordinate(std::size_t flat) const {
    Shape coord(shape_.size());
    for (std::size_t axis = shape_.size(); axis-- > 0;) {
      coord[axis] = flat % shape_[axis];
      flat /= shape_[axis];
    }
    return coord;
  }

  Real& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const Real& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    return std::move(out).reshaped(std::move(shape));
  }
  BasicTensor reshaped(Shape shape) && {
    validate_shape(shape);
    if (shape_size(shape) != data_.size()) {
      fail(ErrorKind::shape_mismatch, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
  }

  template <typename Other>
  BasicTensor<Other> cast() const {
    if (data_.empty()) return {};
    return BasicTensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename Real = float>
BasicTensor<Real> zeros(const Shape& shape) {
  return BasicTensor<Real>(shape);
}

template <typename Real = float>
BasicTensor<Real> rand_normal(const Shape& shape, double mean, double stddev, Rng& rng) {
  if (stddev < 0.0) fail(ErrorKind::invalid_argument, "rand_normal: negative stddev");
  BasicTensor<Real> out(shape);
  for (auto& v : out.data()) v = static_cast<Real>(mean + stddev * rng.normal());
  return out;
}

enum class ElementwiseOp { add, sub, mul, scale, max_with_zero };

namespace detail {

template <typename Real, typename F>
BasicTensor<Real> zip(const BasicTensor<Real>& a, const BasicTensor<Real>& b, F f, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::shape_mismatch,
         std::string(what) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  BasicTensor<Real> out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(o[i], bv[i]);
  return out;
}

}  // namespace detail

template <typename Real>
BasicTensor<Real> add(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return detail::zip(a, b, std::plus<>{}, "add");
}
template <typename Real>
BasicTensor<Real> sub(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return detail::zip(a, b, std::minus<>{}, "sub");
}
template <typename Real>
BasicTensor<Real> mul(const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return detail::zip(a, b, std::multiplies<>{}, "mul");
}
template <typename Real>
BasicTensor<Real> scale(const BasicTensor<Real>& a, Real factor) {
  BasicTensor<Real> out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}
template <typename Real>
BasicTensor<Real> max_with_zero(const BasicTensor<Real>& a) {
  BasicTensor<Real> out = a;
  for (auto& v : out.data()) v = std::max(v, Real{0});
  return out;
}

// Binary form; `scale` and `max_with_zero` ignore `b`'s shape requirement and
// take the scalar / no operand respectively.
template <typename Real>
BasicTensor<Real> elementwise(ElementwiseOp op, const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  switch (op) {
    case ElementwiseOp::add: return add(a, b);
    case ElementwiseOp::sub: return sub(a, b);
    case ElementwiseOp::mul: return mul(a, b);
    case ElementwiseOp::max_with_zero: return max_with_zero(a);
    case ElementwiseOp::scale:
      if (b.size() != 1) fail(ErrorKind::shape_mismatch, "scale expects a single-element operand");
      return scale(a, b[0]);
  }
  fail(ErrorKind::invalid_argument, "unknown elementwise op");
}

template <typename Real>
BasicTensor<Real> elementwise(ElementwiseOp op, const BasicTensor<Real>& a, Real scalar) {
  switch (op) {
    case ElementwiseOp::add: {
      BasicTensor<Real> out = a;
      for (auto& v : out.data()) v += scalar;
      return out;
    }
    case ElementwiseOp::sub: {
      BasicTensor<Real> out = a;
      for (auto& v : out.data()) v -= scalar;
      return out;
    }
    case ElementwiseOp::mul:
    case ElementwiseOp::scale: return scale(a, scalar);
    case ElementwiseOp::max_with_zero: return max_with_zero(a);
  }
  fail(ErrorKind::invalid_argument, "unknown elementwise op");
}

template <typename Real>
bool all_finite(const BasicTensor<Real>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](Real v) { return std::isfinite(v); });
}

}  // namespace nwadapt
