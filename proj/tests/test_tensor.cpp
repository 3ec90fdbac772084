#include <gtest/gtest.h>

#include "camstat/random.hpp"
#include "camstat/tensor.hpp"

using namespace camstat;

TEST(Tensor, RejectsZeroAndMismatchedDims) {
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
  Tensor t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.at(1, 2), 1.5f);
}

TEST(Tensor, ChannelAndReshape) {
  Tensor t({2, 2, 2}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(t.channel(1), Tensor({2, 2}, std::vector<float>{5, 6, 7, 8}));
  EXPECT_EQ(t.at(1, 0, 1), 6.0f);
  EXPECT_THROW(t.reshaped({3, 3}), DimensionError);
}

TEST(Bilinear, ConstantField) {
  auto out = bilinear_resize(Tensor({1, 1}, 7.0f), 3, 3);
  for (float v : out.data()) EXPECT_EQ(v, 7.0f);
}

TEST(Bilinear, IdentitySize) {
  Tensor t({2, 2}, std::vector<float>{0, 1, 0, 1});
  EXPECT_EQ(bilinear_resize(t, 2, 2), t);
}

TEST(Bilinear, CornerAlignedThirds) {
  auto out = bilinear_resize(BasicTensor<double>({1, 2}, std::vector<double>{0, 1}), 1, 4);
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_NEAR(out[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(out[2], 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(out[3], 1.0);
}

TEST(Bilinear, RejectsNon2D) { EXPECT_THROW(bilinear_resize(Tensor({1, 2, 2}), 4, 4), DimensionError); }

TEST(Bilinear, OutputWithinSourceRange) {
  Rng rng(5);
  BasicTensor<double> t({3, 5});
  for (auto& v : t.data()) v = rng.uniform(-2, 2);
  auto out = bilinear_resize(t, 11, 17);
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  for (double v : out.data()) {
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
}

TEST(MinMax, Examples) {
  auto a = minmax_normalize(BasicTensor<double>({2, 2}, std::vector<double>{0, 2, 4, 8}));
  EXPECT_EQ(a, BasicTensor<double>({2, 2}, std::vector<double>{0, 0.25, 0.5, 1}));
  auto b = minmax_normalize(BasicTensor<double>({1, 2}, std::vector<double>{5, 5}));
  EXPECT_EQ(b, BasicTensor<double>({1, 2}, std::vector<double>{0, 0}));
  auto c = minmax_normalize(BasicTensor<double>({3}, std::vector<double>{-1, 0, 3}));
  EXPECT_EQ(c, BasicTensor<double>({3}, std::vector<double>{0, 0.25, 1}));
}

TEST(Relu, Examples) {
  EXPECT_EQ(relu(Tensor({3}, std::vector<float>{-1, 0, 2})), Tensor({3}, std::vector<float>{0, 0, 2}));
  EXPECT_EQ(relu(Tensor({2}, -3.0f)), Tensor({2}, 0.0f));
}

TEST(Random, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
  EXPECT_NE(Rng(42)(), Rng(43)());
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Random, IndexUniformity) {
  Rng rng(9);
  std::array<int, 5> counts{};
  for (int i = 0; i < 50000; ++i) ++counts[rng.index(5)];
  for (int c : counts) EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
}
