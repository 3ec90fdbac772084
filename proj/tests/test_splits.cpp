#include <gtest/gtest.h>

#include <map>
#include <set>

#include "camstat/splits.hpp"

using namespace camstat;

namespace {

std::vector<int> labels_with(std::size_t cases, std::size_t controls) {
  std::vector<int> y(cases, 1);
  y.resize(cases + controls, 0);
  return y;
}

std::array<std::size_t, 3> case_counts(const SubsetPartition& p, const std::vector<int>& y) {
  std::array<std::size_t, 3> out{};
  for (std::size_t k = 0; k < 3; ++k)
    for (auto i : p.subsets[k]) out[k] += y[i];
  return out;
}

}  // namespace

TEST(Splits, PartitionPropertyAllScenarios) {
  const auto y = labels_with(40, 61);
  const auto splits = make_splits(y, 5);
  ASSERT_EQ(splits.size(), 6u);
  for (const auto& s : splits) {
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (auto i : *part) EXPECT_TRUE(all.insert(i).second) << "scenario " << s.index << " repeats " << i;
    EXPECT_EQ(all.size(), y.size());
  }
}

TEST(Splits, EachSampleTestedTwice) {
  const auto y = labels_with(13, 20);
  std::map<std::size_t, int> tested;
  for (const auto& s : make_splits(y, 1))
    for (auto i : s.test) ++tested[i];
  ASSERT_EQ(tested.size(), y.size());
  for (const auto& [i, n] : tested) EXPECT_EQ(n, 2) << i;
}

TEST(Splits, SubsetOrderIsLexicographic) {
  const auto splits = make_splits(labels_with(3, 3), 0);
  const std::array<std::array<int, 3>, 6> want{{{1, 2, 3}, {1, 3, 2}, {2, 1, 3}, {2, 3, 1}, {3, 1, 2}, {3, 2, 1}}};
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(splits[k].index, static_cast<int>(k + 1));
    EXPECT_EQ(splits[k].subsets, want[k]);
  }
}

TEST(Splits, TableTwoBalance) {
  // 26 vessel-style cases dealt 9/9/8; ORIGA-sized 168 / 482 dealt evenly.
  const auto y26 = labels_with(26, 3);
  const auto p26 = partition_three(y26, 3);
  EXPECT_EQ(case_counts(p26, y26), (std::array<std::size_t, 3>{9, 9, 8}));

  const auto y = labels_with(168, 482);
  const auto p = partition_three(y, 3);
  EXPECT_EQ(case_counts(p, y), (std::array<std::size_t, 3>{56, 56, 56}));
  std::array<std::size_t, 3> controls{};
  for (std::size_t k = 0; k < 3; ++k) controls[k] = p.subsets[k].size() - case_counts(p, y)[k];
  EXPECT_EQ(controls, (std::array<std::size_t, 3>{161, 161, 160}));
}

TEST(Splits, DeterministicAndSeedDependent) {
  const auto y = labels_with(30, 30);
  const auto a = partition_three(y, 9), b = partition_three(y, 9), c = partition_three(y, 10);
  EXPECT_EQ(a.subsets, b.subsets);
  EXPECT_NE(a.subsets, c.subsets);
}

TEST(Splits, TooFewPerClass) {
  EXPECT_THROW(make_splits(labels_with(2, 10), 0), DegenerateSplitError);
  EXPECT_THROW(make_splits(std::vector<int>{0, 1, 2}, 0), DataError);
}

TEST(ExternalSplit, StratifiedHalves) {
  const auto y = labels_with(21, 30);
  const auto e = make_external_split(y, 4);
  EXPECT_EQ(e.val.size() + e.test.size(), y.size());
  std::set<std::size_t> all(e.val.begin(), e.val.end());
  for (auto i : e.test) EXPECT_TRUE(all.insert(i).second);
  std::size_t val_cases = 0, test_cases = 0;
  for (auto i : e.val) val_cases += y[i];
  for (auto i : e.test) test_cases += y[i];
  EXPECT_EQ(val_cases, 11u);
  EXPECT_EQ(test_cases, 10u);
  EXPECT_THROW(make_external_split(std::vector<int>{1, 0, 0}, 0), DegenerateSplitError);
}
