#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "camstat/error.hpp"
#include "camstat/random.hpp"
#include "camstat/tensor.hpp"

namespace camstat {

/// Fundus-like toy images: every image carries a disk-shaped "anatomy" on a
/// noisy background. In class 1 the disk is bright; in class 0 it is faint,
/// so the disk is the only evidence for the label.
struct SyntheticConfig {
  std::size_t count = 200;
  std::size_t size = 56;
  double positive_fraction = 0.5;
  double background = 0.2;
  double noise_sd = 0.05;
  double case_contrast = 0.6;
  double control_contrast = 0.1;
  double min_radius = 4.0;
  double max_radius = 7.0;
  std::uint64_t seed = 0;
};

struct SyntheticSample {
  std::string id;
  int label = 0;
  Tensor image;  // 1 x size x size, values in [0, 1]
  Tensor mask;   // size x size, 1 on the disk
};

inline constexpr const char* kSyntheticAnatomy = "disk";

inline std::vector<SyntheticSample> make_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.size < 4 || cfg.size % 4 != 0) throw ConfigError("synthetic image size must be a positive multiple of 4");
  if (!(cfg.positive_fraction > 0.0 && cfg.positive_fraction < 1.0)) {
    throw ConfigError("positive fraction must lie in (0, 1)");
  }
  if (!(cfg.min_radius >= 1.0 && cfg.max_radius >= cfg.min_radius &&
        2.0 * cfg.max_radius + 4.0 < static_cast<double>(cfg.size))) {
    throw ConfigError("disk radius range does not fit the image");
  }
  const std::size_t S = cfg.size;
  const auto positives = static_cast<std::size_t>(std::llround(cfg.positive_fraction * static_cast<double>(cfg.count)));

  std::vector<SyntheticSample> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    SyntheticSample s;
    // Interleave the classes so any prefix of the dataset is balanced.
    s.label = (i * positives) / cfg.count != ((i + 1) * positives) / cfg.count ? 1 : 0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "syn%04zu", i);
    s.id = buf;

    const double r = rng.uniform(cfg.min_radius, cfg.max_radius);
    const double lo = r + 2.0, hi = static_cast<double>(S) - r - 3.0;
    const double cy = rng.uniform(lo, hi), cx = rng.uniform(lo, hi);
    const double contrast = s.label == 1 ? cfg.case_contrast : cfg.control_contrast;

    s.image = Tensor({1, S, S});
    s.mask = Tensor({S, S});
    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        const bool inside = dy * dy + dx * dx <= r * r;
        double v = cfg.background + cfg.noise_sd * rng.normal();
        if (inside) v += contrast;
        s.image[y * S + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        s.mask[y * S + x] = inside ? 1.0f : 0.0f;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace camstat
