#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "camstat/cam.hpp"
#include "camstat/error.hpp"
#include "camstat/tensor.hpp"

namespace camstat {

/// Binary pixel annotation of one anatomical structure (1 = inside).
struct AnatomyMask {
  Tensor pixels;

  explicit AnatomyMask(Tensor t) : pixels(std::move(t)) {
    if (pixels.ndim() != 2) {
      throw DimensionError("anatomy mask must be H x W, got " + dims_to_string(pixels.dims()));
    }
    for (float v : pixels.data()) {
      if (v != 0.0f && v != 1.0f) throw DataError("anatomy mask values must be 0 or 1");
    }
  }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(pixels.data().begin(), pixels.data().end(), 1.0f));
  }
};

/// The top-fraction pixels of a saliency map.
struct FocusRegion {
  Tensor pixels;
  std::size_t count = 0;
};

struct RatioRecord {
  double activation_ratio = 0.0;
  double structure_ratio = 0.0;
  double difference = 0.0;

  static RatioRecord make(double activation, double structure) {
    return {activation, structure, activation - structure};
  }
};

inline constexpr double kDefaultFocusFraction = 0.05;

inline std::size_t focus_budget(std::size_t pixels, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ParameterError("focus fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  // A fraction like 0.05 is not exact in binary; snap products that sit
  // within rounding of an integer before taking the floor.
  const double exact = fraction * static_cast<double>(pixels);
  const double nearest = std::round(exact);
  const double n = std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact) ? nearest : std::floor(exact);
  if (n < 1.0) {
    throw ParameterError("focus fraction " + std::to_string(fraction) + " selects no pixel of a " +
                         std::to_string(pixels) + "-pixel image");
  }
  return static_cast<std::size_t>(n);
}

/// Selects floor(q * H * W) pixels in descending saliency; equal values are
/// taken in row-major order.
inline FocusRegion top_fraction_region(const SaliencyMap& s, double fraction) {
  const auto values = s.values.data();
  const std::size_t n = focus_budget(values.size(), fraction);
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values[a] > values[b] || (values[a] == values[b] && a < b);
                    });
  FocusRegion r{Tensor(s.values.dims(), 0.0f), n};
  for (std::size_t i = 0; i < n; ++i) r.pixels[order[i]] = 1.0f;
  return r;
}

/// |R intersect A| / |R|
inline double activation_ratio(const FocusRegion& r, const AnatomyMask& a) {
  if (r.pixels.dims() != a.pixels.dims()) {
    throw DimensionError("focus region " + dims_to_string(r.pixels.dims()) + " and mask " +
                         dims_to_string(a.pixels.dims()) + " differ in shape");
  }
  if (r.count == 0) throw ParameterError("activation ratio of an empty focus region");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < r.pixels.size(); ++i) {
    if (r.pixels[i] == 1.0f && a.pixels[i] == 1.0f) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(r.count);
}

/// |A| / (H * W)
inline double structure_ratio(const AnatomyMask& a) {
  return static_cast<double>(a.count()) / static_cast<double>(a.pixels.size());
}

inline RatioRecord compare_region(const FocusRegion& r, const AnatomyMask& a) {
  return RatioRecord::make(activation_ratio(r, a), structure_ratio(a));
}

}  // namespace camstat
