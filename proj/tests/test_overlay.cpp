#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

#include "camstat/overlay.hpp"

using namespace camstat;

namespace {

struct Case {
  Tensor image{{1, 8, 8}};
  SaliencyMap saliency{Tensor({8, 8})};
  AnatomyMask mask{Tensor({8, 8}, 0.0f)};
};

// Gradient image, saliency peaked at (2, 5), square mask in the lower left.
Case golden_case() {
  Case c;
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t col = 0; col < 8; ++col) {
      c.image[r * 8 + col] = static_cast<float>(r * 8 + col) / 63.0f;
      const double d2 = (static_cast<double>(r) - 2.0) * (static_cast<double>(r) - 2.0) +
                        (static_cast<double>(col) - 5.0) * (static_cast<double>(col) - 5.0);
      c.saliency.values[r * 8 + col] = static_cast<float>(1.0 / (1.0 + d2));
      if (r >= 4 && r <= 7 && col <= 3) c.mask.pixels[r * 8 + col] = 1.0f;
    }
  }
  return c;
}

std::vector<std::uint8_t> pixels_of(const std::vector<std::uint8_t>& ppm, std::size_t header) {
  return {ppm.begin() + static_cast<std::ptrdiff_t>(header), ppm.end()};
}

}  // namespace

TEST(Overlay, GoldenFile) {
  const auto c = golden_case();
  const auto bytes = encode_overlay(c.image, c.saliency, c.mask, 0.25);
  const std::string path = std::string(CAMSTAT_TEST_DATA) + "/overlay_8x8.ppm";
  if (std::getenv("CAMSTAT_WRITE_GOLDEN")) write_file(path, bytes);
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << "missing golden file " << path;
  const std::vector<std::uint8_t> golden((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes, golden);
}

TEST(Overlay, ZeroSaliencyEmptyMaskIsGray) {
  auto c = golden_case();
  const auto bytes = encode_overlay(c.image, SaliencyMap{Tensor({8, 8}, 0.0f)}, AnatomyMask(Tensor({8, 8}, 0.0f)));
  const std::string header = "P6\n8 8\n255\n";
  ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  const auto px = pixels_of(bytes, header.size());
  ASSERT_EQ(px.size(), 3u * 64);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(px[3 * i], px[3 * i + 1]);
    EXPECT_EQ(px[3 * i], px[3 * i + 2]);
  }
  EXPECT_EQ(px[0], 0);
  EXPECT_EQ(px[3 * 63], 255);
}

TEST(Overlay, FullMaskGivesBorderRing) {
  auto c = golden_case();
  const auto bytes = encode_overlay(c.image, SaliencyMap{Tensor({8, 8}, 0.0f)}, AnatomyMask(Tensor({8, 8}, 1.0f)));
  const auto px = pixels_of(bytes, std::string("P6\n8 8\n255\n").size());
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t col = 0; col < 8; ++col) {
      const bool border = r == 0 || col == 0 || r == 7 || col == 7;
      const std::size_t i = r * 8 + col;
      if (border) EXPECT_EQ(px[3 * i + 1], 255);
      else EXPECT_EQ(px[3 * i + 1], px[3 * i + 2]);
    }
  }
}

TEST(Overlay, ShapeMismatchAndUnwritablePath) {
  auto c = golden_case();
  EXPECT_THROW(encode_overlay(c.image, SaliencyMap{Tensor({4, 4})}, c.mask), DimensionError);
  EXPECT_THROW(render_overlay(c.image, c.saliency, c.mask, "/nonexistent-dir/x.ppm"), IoError);
}
