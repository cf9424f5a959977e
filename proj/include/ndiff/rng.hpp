#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace ndiff {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic seed for a sub-stream, e.g. derive_seed(base, model, trial).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t v : path) h = mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n) by multiply-shift.
inline int uniform_below(Rng& rng, int n) {
  return static_cast<int>((static_cast<unsigned __int128>(rng()) * static_cast<std::uint64_t>(n)) >> 64);
}

inline bool coin(Rng& rng) { return (rng() >> 63) != 0; }

// Inverse-CDF draw from an unnormalized weight vector.
inline int sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double x = uniform01(rng) * total;
  const int k = static_cast<int>(weights.size());
  for (int i = 0; i < k; ++i) {
    x -= weights[i];
    if (x < 0.0) return i;
  }
  // Round-off landed past the end: take the last symbol with positive weight.
  for (int i = k - 1; i >= 0; --i)
    if (weights[i] > 0.0) return i;
  return k - 1;
}

}  // namespace ndiff
