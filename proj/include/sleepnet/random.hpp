#pragma once

#include <cstdint>
#include <random>

namespace sleepnet {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; decorrelates stream seeds derived from one run seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent named streams so that, e.g., changing how many noise draws a
// run makes never shifts its connectivity or its stimulus encoding.
enum class Stream : std::uint64_t {
  kConnectivity = 1,
  kEncoding = 2,
  kNoise = 3,
  kSplit = 4,
  kDataset = 5,
  kEvaluation = 6,
  kInit = 7,
  kSleep = 8,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(mix_seed(mix_seed(seed) ^ static_cast<std::uint64_t>(stream)));
}

}  // namespace sleepnet
