#pragma once

// Seeded random streams. Every random quantity in the library is drawn from a
// stream derived from (master seed, index, label), so trials are reproducible
// regardless of which worker runs them.

#include <cstdint>
#include <random>
#include <string_view>

namespace lrmc {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// 64-bit seed for the stream named `label` at position `index` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 std::string_view label) {
  const std::uint64_t tag = detail::fnv1a(label);
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index),  static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag),    static_cast<std::uint32_t>(tag >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index, std::string_view label) {
  return Rng(derive_seed(master, index, label));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

inline double rademacher(Rng& rng) { return uniform01(rng) < 0.5 ? 1.0 : -1.0; }

}  // namespace lrmc
