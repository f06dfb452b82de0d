#pragma once

// Portable random helpers. std:: distributions are implementation-defined, so
// anything that feeds a file format or a frozen test value goes through these.

#include <cmath>
#include <cstdint>
#include <random>

namespace mlg {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent substream seed for (seed, a, b); used for replicate-, epoch- and
// sample-indexed streams.
constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ull));
}

// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform integer in [lo, hi].
inline std::int64_t uniform_int(Engine& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

// Uniform double in [0, 1).
inline double uniform01(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Engine& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename It>
void shuffle(It first, It last, Engine& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(uniform_index(rng, static_cast<std::uint64_t>(i) + 1));
    std::swap(first[i], first[j]);
  }
}

// FNV-1a, used for fingerprints and content hashes.
constexpr std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mlg
