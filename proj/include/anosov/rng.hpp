#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace anosov {

// Independent stream for a key (seed, labels...). The same key always gives
// the same stream, whatever thread or order it is requested in.
inline std::mt19937_64 keyed_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  std::vector<std::uint32_t> words;
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  push(labels.size());
  for (auto l : labels) push(l);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Stream labels used across the code base.
namespace stream {
inline constexpr std::uint64_t kThetaSample = 1;
inline constexpr std::uint64_t kBowen = 2;
inline constexpr std::uint64_t kBowenPilot = 3;
inline constexpr std::uint64_t kSupremum = 4;
inline constexpr std::uint64_t kPartition = 5;
inline constexpr std::uint64_t kBounds = 6;
inline constexpr std::uint64_t kInclusion = 7;
}  // namespace stream

}  // namespace anosov
