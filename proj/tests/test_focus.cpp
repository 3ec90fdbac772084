#include <gtest/gtest.h>

#include "camstat/cam.hpp"
#include "camstat/focus.hpp"
#include "camstat/random.hpp"

using namespace camstat;

namespace {

SaliencyMap map_of(std::size_t h, std::size_t w, std::vector<float> v) { return {Tensor({h, w}, std::move(v))}; }

// Greedy oracle: repeatedly take the largest unselected value, first in scan order.
std::vector<int> greedy_region(const std::vector<float>& v, std::size_t n) {
  std::vector<int> sel(v.size(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = v.size();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!sel[i] && (best == v.size() || v[i] > v[best])) best = i;
    sel[best] = 1;
  }
  return sel;
}

}  // namespace

TEST(FocusBudget, FloorOfFraction) {
  EXPECT_EQ(focus_budget(224 * 224, 0.05), 2508u);
  EXPECT_EQ(focus_budget(56 * 56, 0.05), 156u);
  EXPECT_EQ(focus_budget(100, 0.05), 5u);
  EXPECT_EQ(focus_budget(4, 1.0), 4u);
  EXPECT_THROW(focus_budget(4, 0.0), ParameterError);
  EXPECT_THROW(focus_budget(4, 1.5), ParameterError);
  EXPECT_THROW(focus_budget(4, 0.1), ParameterError);
}

TEST(FocusRegion, UniqueMax) {
  auto r = top_fraction_region(map_of(2, 2, {4, 3, 2, 1}), 0.25);
  EXPECT_EQ(r.count, 1u);
  EXPECT_EQ(r.pixels, Tensor({2, 2}, std::vector<float>{1, 0, 0, 0}));
}

TEST(FocusRegion, TiesInScanOrder) {
  auto r = top_fraction_region(map_of(2, 2, {1, 1, 1, 1}), 0.5);
  EXPECT_EQ(r.pixels, Tensor({2, 2}, std::vector<float>{1, 1, 0, 0}));
}

TEST(FocusRegion, MatchesGreedyOracleOnSmallGrids) {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t h = 1 + rng.index(6), w = 1 + rng.index(6);
    std::vector<float> v(h * w);
    // Few distinct levels so ties are common.
    for (auto& x : v) x = static_cast<float>(rng.index(4)) / 3.0f;
    const double q = (1.0 + static_cast<double>(rng.index(h * w))) / static_cast<double>(h * w);
    auto r = top_fraction_region(map_of(h, w, v), q);
    const auto want = greedy_region(v, r.count);
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(r.pixels[i], static_cast<float>(want[i]));
  }
}

TEST(Ratios, Examples) {
  FocusRegion r{Tensor({2, 4}, std::vector<float>{1, 1, 1, 1, 0, 0, 0, 0}), 4};
  AnatomyMask half(Tensor({2, 4}, std::vector<float>{1, 1, 0, 0, 1, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(activation_ratio(r, half), 0.5);
  AnatomyMask all(Tensor({2, 4}, 1.0f));
  EXPECT_DOUBLE_EQ(activation_ratio(r, all), 1.0);
  EXPECT_DOUBLE_EQ(structure_ratio(all), 1.0);
  EXPECT_DOUBLE_EQ(structure_ratio(AnatomyMask(Tensor({2, 4}, 0.0f))), 0.0);
  EXPECT_DOUBLE_EQ(structure_ratio(half), 3.0 / 8.0);
  auto rec = compare_region(r, half);
  EXPECT_DOUBLE_EQ(rec.difference, 0.5 - 3.0 / 8.0);
}

TEST(Ratios, UnitScaleAnchor) {
  // 119 of 2508 focus pixels inside the structure.
  Tensor region({224, 224}, 0.0f), mask({224, 224}, 0.0f);
  for (std::size_t i = 0; i < 2508; ++i) region[i] = 1.0f;
  for (std::size_t i = 0; i < 119; ++i) mask[i] = 1.0f;
  EXPECT_NEAR(activation_ratio({region, 2508}, AnatomyMask(mask)), 0.04744, 1e-5);
}

TEST(Ratios, Errors) {
  FocusRegion r{Tensor({2, 2}, 0.0f), 0};
  EXPECT_THROW(activation_ratio(r, AnatomyMask(Tensor({2, 2}, 0.0f))), ParameterError);
  FocusRegion r2{Tensor({2, 2}, 1.0f), 4};
  EXPECT_THROW(activation_ratio(r2, AnatomyMask(Tensor({2, 3}, 0.0f))), DimensionError);
  EXPECT_THROW(AnatomyMask(Tensor({2, 2}, 0.5f)), DataError);
}

TEST(Ratios, PartitionIdentity) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor s({8, 8}), m({8, 8}), c({8, 8});
    for (auto& v : s.data()) v = static_cast<float>(rng.uniform());
    for (std::size_t i = 0; i < 64; ++i) {
      m[i] = rng.index(2) ? 1.0f : 0.0f;
      c[i] = 1.0f - m[i];
    }
    auto r = top_fraction_region({s}, 0.25);
    EXPECT_NEAR(activation_ratio(r, AnatomyMask(m)), 1.0 - activation_ratio(r, AnatomyMask(c)), 1e-12);
  }
}

TEST(FocusRegion, InvariantUnderGradientScaling) {
  Rng rng(12);
  Tensor acts({4, 7, 7}), grads({4, 7, 7});
  for (auto& v : acts.data()) v = static_cast<float>(rng.uniform(0, 1));
  for (auto& v : grads.data()) v = static_cast<float>(rng.uniform(-1, 1));
  const LayerActivations a(acts);
  const auto base_g = grad_cam(a, LayerGradients(grads), {28, 28});
  const auto base = top_fraction_region(base_g, 0.05);
  for (float c : {0.1f, 10.0f}) {
    Tensor scaled = grads;
    for (auto& v : scaled.data()) v *= c;
    EXPECT_EQ(top_fraction_region(grad_cam(a, LayerGradients(scaled), {28, 28}), 0.05).pixels, base.pixels);
  }
}
