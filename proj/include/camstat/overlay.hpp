#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "camstat/cam.hpp"
#include "camstat/error.hpp"
#include "camstat/focus.hpp"
#include "camstat/tensor.hpp"

namespace camstat {

namespace detail {

inline Tensor grayscale_plane(const Tensor& image) {
  const Extent e = spatial_extent(image);
  const std::size_t plane = e.height * e.width;
  const std::size_t channels = image.size() / plane;
  Tensor out({e.height, e.width});
  for (std::size_t i = 0; i < plane; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < channels; ++c) s += image[c * plane + i];
    out[i] = static_cast<float>(s / static_cast<double>(channels));
  }
  return out;
}

inline bool on_mask_boundary(const AnatomyMask& m, std::size_t r, std::size_t c) {
  const std::size_t H = m.pixels.dim(0), W = m.pixels.dim(1);
  if (m.pixels.at(r, c) != 1.0f) return false;
  if (r == 0 || c == 0 || r + 1 == H || c + 1 == W) return true;
  return m.pixels.at(r - 1, c) != 1.0f || m.pixels.at(r + 1, c) != 1.0f || m.pixels.at(r, c - 1) != 1.0f ||
         m.pixels.at(r, c + 1) != 1.0f;
}

}  // namespace detail

/// Binary PPM (P6) overlay. The image (channel mean, min-max scaled) forms a
/// grayscale base; focus-region pixels with positive saliency get a full red
/// channel; mask pixels on the mask boundary (4-neighbourhood, image border
/// included) get a full green channel.
inline std::vector<std::uint8_t> encode_overlay(const Tensor& image, const SaliencyMap& saliency,
                                                const AnatomyMask& mask, double fraction = kDefaultFocusFraction) {
  const Extent e = detail::spatial_extent(image);
  const Dims plane{e.height, e.width};
  if (saliency.values.dims() != plane || mask.pixels.dims() != plane) {
    throw DimensionError("overlay inputs disagree: image " + dims_to_string(image.dims()) + ", saliency " +
                         dims_to_string(saliency.values.dims()) + ", mask " + dims_to_string(mask.pixels.dims()));
  }
  const Tensor base = minmax_normalize(detail::grayscale_plane(image));
  const FocusRegion region = top_fraction_region(saliency, fraction);

  const std::string header = "P6\n" + std::to_string(e.width) + " " + std::to_string(e.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + 3 * base.size());
  for (std::size_t r = 0; r < e.height; ++r) {
    for (std::size_t c = 0; c < e.width; ++c) {
      const std::size_t i = r * e.width + c;
      const auto g = static_cast<std::uint8_t>(std::lround(255.0 * base[i]));
      std::uint8_t red = g, green = g, blue = g;
      if (region.pixels[i] == 1.0f && saliency.values[i] > 0.0f) red = 255;
      if (detail::on_mask_boundary(mask, r, c)) green = 255;
      out.push_back(red);
      out.push_back(green);
      out.push_back(blue);
    }
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline void render_overlay(const Tensor& image, const SaliencyMap& saliency, const AnatomyMask& mask,
                           const std::filesystem::path& out_path, double fraction = kDefaultFocusFraction) {
  write_file(out_path, encode_overlay(image, saliency, mask, fraction));
}

}  // namespace camstat
