#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfqmm {

using Rng = std::mt19937_64;

/// Streams consumed by one episode. Keeping them apart lets two runs share
/// price noise while differing in, say, quoting policy.
enum class Stream : std::uint64_t {
  kInitialState = 1,
  kRegime = 2,
  kPrice = 3,
  kFills = 4,
  kPolicy = 5,
  kShuffle = 6,
  kInit = 7,
  kEpisode = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based substream derivation: the result depends only on the master
/// seed and the path, never on how many draws other streams consumed.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream s) {
  return derive_seed(master, {static_cast<std::uint64_t>(s)});
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline Rng make_rng(std::uint64_t master, Stream s) { return make_rng(derive_seed(master, s)); }

}  // namespace rfqmm
