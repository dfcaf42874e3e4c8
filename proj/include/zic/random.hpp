#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "zic/core.hpp"

namespace zic {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based stream derivation: the same (seed, path) always yields the
/// same stream, independent of how many other streams were created before it.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = detail::splitmix64(seed);
  for (std::uint64_t p : path) h = detail::splitmix64(h ^ detail::splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(seed, path));
}

/// Stream tags used by the library so that call sites stay readable.
enum StreamTag : std::uint64_t {
  kInitStream = 1,
  kChannelStream = 2,
  kBitStream = 3,
  kNoiseStream = 4,
  kEvalStream = 5,
};

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Draws from CN(mean, variance): independent real and imaginary parts, each
/// with variance `variance / 2`.
inline Complex complex_gaussian(Rng& rng, Complex mean, double variance) {
  if (variance == 0.0) return mean;
  std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
  const double re = nd(rng);
  const double im = nd(rng);
  return mean + Complex(re, im);
}

}  // namespace zic
