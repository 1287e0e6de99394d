#pragma once

#include <cstdint>
#include <random>

namespace dpoly {

// Mixes a counter into a well-distributed 64-bit value (splitmix64).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Names one substream of a seeded run.  Pool generation at level k hands
// block i of offspring to the stream (seed, k, i), so identical configs
// produce identical populations no matter how blocks are scheduled across
// threads.  Pool operations take an RngSpec for its seed and derive the
// level and block fields themselves.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t level = 0;
  std::uint64_t block = 0;
};

inline std::mt19937_64 substream(const RngSpec& spec) {
  std::uint64_t h = splitmix64(spec.seed);
  h = splitmix64(h + spec.level);
  h = splitmix64(h + spec.block);
  return std::mt19937_64(h);
}

// Offspring per substream block during pool evolution.
inline constexpr std::int64_t kPoolBlockSize = 16384;

}  // namespace dpoly
