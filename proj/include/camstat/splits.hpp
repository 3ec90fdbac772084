#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camstat/error.hpp"
#include "camstat/random.hpp"

namespace camstat {

/// One (train, validation, test) assignment of the three subsets.
struct SplitScenario {
  int index = 0;                 // 1..6
  std::array<int, 3> subsets{};  // 1-based subset ids for train, val, test
  std::vector<std::size_t> train, val, test;
};

struct SubsetPartition {
  std::array<std::vector<std::size_t>, 3> subsets;
};

namespace detail {

inline std::array<std::vector<std::size_t>, 2> indices_by_class(std::span<const int> labels) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return by_class;
}

}  // namespace detail

/// Class-stratified seeded partition into three subsets. Each class is
/// shuffled and dealt round-robin, so per-class subset sizes differ by at
/// most one (e.g. 26 -> 9/9/8). Indices inside a subset are ascending.
inline SubsetPartition partition_three(std::span<const int> labels, std::uint64_t seed) {
  auto by_class = detail::indices_by_class(labels);
  for (int c = 0; c < 2; ++c) {
    if (by_class[static_cast<std::size_t>(c)].size() < 3) {
      throw DegenerateSplitError("class " + std::to_string(c) + " has " +
                                 std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                                 " samples; three subsets need at least 3 per class");
    }
  }
  SubsetPartition p;
  for (std::size_t c = 0; c < 2; ++c) {
    Rng rng(derive_seed(seed, c));
    auto& members = by_class[c];
    rng.shuffle(members.begin(), members.end());
    for (std::size_t i = 0; i < members.size(); ++i) p.subsets[i % 3].push_back(members[i]);
  }
  for (auto& s : p.subsets) std::sort(s.begin(), s.end());
  return p;
}

/// All six ordered (train, val, test) permutations of the three subsets,
/// in lexicographic order of the subset ids.
inline std::vector<SplitScenario> make_splits(std::span<const int> labels, std::uint64_t seed) {
  const auto p = partition_three(labels, seed);
  static constexpr std::array<std::array<int, 3>, 6> kOrders{{
      {1, 2, 3}, {1, 3, 2}, {2, 1, 3}, {2, 3, 1}, {3, 1, 2}, {3, 2, 1}}};
  std::vector<SplitScenario> out;
  for (std::size_t k = 0; k < kOrders.size(); ++k) {
    SplitScenario s;
    s.index = static_cast<int>(k + 1);
    s.subsets = kOrders[k];
    s.train = p.subsets[static_cast<std::size_t>(kOrders[k][0] - 1)];
    s.val = p.subsets[static_cast<std::size_t>(kOrders[k][1] - 1)];
    s.test = p.subsets[static_cast<std::size_t>(kOrders[k][2] - 1)];
    out.push_back(std::move(s));
  }
  return out;
}

struct ExternalSplit {
  std::vector<std::size_t> val, test;
};

/// Stratified 50:50 validation/test split of an external dataset.
inline ExternalSplit make_external_split(std::span<const int> labels, std::uint64_t seed) {
  auto by_class = detail::indices_by_class(labels);
  for (std::size_t c = 0; c < 2; ++c) {
    if (by_class[c].size() < 2) {
      throw DegenerateSplitError("external dataset needs at least 2 samples of class " + std::to_string(c));
    }
  }
  ExternalSplit out;
  for (std::size_t c = 0; c < 2; ++c) {
    Rng rng(derive_seed(seed, c));
    auto& members = by_class[c];
    rng.shuffle(members.begin(), members.end());
    for (std::size_t i = 0; i < members.size(); ++i) (i % 2 == 0 ? out.val : out.test).push_back(members[i]);
  }
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace camstat
