#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "camstat/error.hpp"

namespace camstat {

using Dims = std::vector<std::size_t>;

inline std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  return os.str();
}

inline std::size_t dims_product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major N-d array (last dimension fastest).
///
/// Every dimension is at least one and the buffer length always equals the
/// product of the dimensions. Floating point type is a template parameter so
/// the numeric code can run in double where a check needs it; `Tensor` is the
/// f32 carrier used at every interface.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : dims_{1}, data_(1, T{}) {}

  explicit BasicTensor(Dims dims, T fill = T{}) : dims_(std::move(dims)) {
    check_dims(dims_);
    data_.assign(dims_product(dims_), fill);
  }

  BasicTensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims(dims_);
    if (data_.size() != dims_product(dims_)) {
      throw DimensionError("tensor buffer holds " + std::to_string(data_.size()) +
                           " values but dims " + dims_to_string(dims_) + " need " +
                           std::to_string(dims_product(dims_)));
    }
  }

  static BasicTensor matrix(std::size_t rows, std::size_t cols, std::vector<T> data) {
    return BasicTensor({rows, cols}, std::move(data));
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t ndim() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

  T& at(std::size_t k, std::size_t r, std::size_t c) {
    return data_[(k * dims_[1] + r) * dims_[2] + c];
  }
  const T& at(std::size_t k, std::size_t r, std::size_t c) const {
    return data_[(k * dims_[1] + r) * dims_[2] + c];
  }

  /// View of one leading-index slice of a 3-d tensor as a 2-d tensor (copy).
  BasicTensor channel(std::size_t k) const {
    if (ndim() != 3) throw DimensionError("channel() needs a 3-d tensor, got " + dims_to_string(dims_));
    const std::size_t plane = dims_[1] * dims_[2];
    std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(k * plane),
                       data_.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane));
    return BasicTensor({dims_[1], dims_[2]}, std::move(out));
  }

  BasicTensor reshaped(Dims dims) const { return BasicTensor(std::move(dims), data_); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return BasicTensor<U>(dims_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  static void check_dims(const Dims& dims) {
    if (dims.empty()) throw DimensionError("tensor needs at least one dimension");
    for (auto d : dims) {
      if (d == 0) throw DimensionError("tensor dims must be positive, got " + dims_to_string(dims));
    }
  }

  Dims dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

struct PixelCoord {
  std::size_t w = 0;  // column
  std::size_t h = 0;  // row
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

namespace detail {

// Corner-aligned source coordinate for destination index d on an axis that
// maps `dst` samples onto `src` samples.
inline double corner_aligned(std::size_t d, std::size_t src, std::size_t dst) {
  if (dst == 1) return 0.0;
  return static_cast<double>(d) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
}

}  // namespace detail

/// Corner-aligned bilinear resize of a 2-d tensor.
template <typename T>
BasicTensor<T> bilinear_resize(const BasicTensor<T>& src, std::size_t out_h, std::size_t out_w) {
  if (src.ndim() != 2) {
    throw DimensionError("bilinear_resize expects a 2-d tensor, got " + dims_to_string(src.dims()));
  }
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_resize output extents must be >= 1");
  const std::size_t in_h = src.dim(0), in_w = src.dim(1);
  if (in_h == out_h && in_w == out_w) return src;

  BasicTensor<T> out({out_h, out_w});
  for (std::size_t r = 0; r < out_h; ++r) {
    const double y = detail::corner_aligned(r, in_h, out_h);
    const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, in_h - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < out_w; ++c) {
      const double x = detail::corner_aligned(c, in_w, out_w);
      const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, in_w - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = (1.0 - fx) * src.at(y0, x0) + fx * src.at(y0, x1);
      const double bot = (1.0 - fx) * src.at(y1, x0) + fx * src.at(y1, x1);
      double v = (1.0 - fy) * top + fy * bot;
      // Keep the result a convex combination after rounding.
      const double lo = std::min({src.at(y0, x0), src.at(y0, x1), src.at(y1, x0), src.at(y1, x1)});
      const double hi = std::max({src.at(y0, x0), src.at(y0, x1), src.at(y1, x0), src.at(y1, x1)});
      v = std::clamp(v, lo, hi);
      out.at(r, c) = static_cast<T>(v);
    }
  }
  return out;
}

/// (t - min) / (max - min); a constant tensor maps to all zeros.
template <typename T>
BasicTensor<T> minmax_normalize(const BasicTensor<T>& t) {
  auto [lo_it, hi_it] = std::minmax_element(t.data().begin(), t.data().end());
  const double lo = *lo_it, hi = *hi_it;
  BasicTensor<T> out(t.dims());
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < t.size(); ++i) {
    out[i] = static_cast<T>(std::clamp((static_cast<double>(t[i]) - lo) / range, 0.0, 1.0));
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& t) {
  BasicTensor<T> out = t;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

}  // namespace camstat
