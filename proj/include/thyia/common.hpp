#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace thyia {

// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (advancing a finished game,
// feeding a model features of the wrong size, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

inline constexpr int kNumActions = 5;

// Probability vector over actions in canonical order (Up, Down, Left, Right,
// Nil).
using Policy = std::array<double, kNumActions>;

inline Policy UniformPolicy() {
  Policy p;
  p.fill(1.0 / kNumActions);
  return p;
}

// Uniform integer in [0, n). Multiply-shift mapping; the bias for small n is
// below 2^-58 and irrelevant here.
inline std::size_t UniformIndex(Rng& rng, std::size_t n) {
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(rng()) * static_cast<unsigned __int128>(n);
  return static_cast<std::size_t>(wide >> 64);
}

// Uniform double in [0, 1) with 53 random bits.
inline double UniformReal(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Draws an index with probability proportional to weights. All-zero weights
// fall back to a uniform draw.
inline std::size_t SampleWeighted(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return UniformIndex(rng, weights.size());
  const double target = UniformReal(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent child seed for a named purpose.
inline std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t salt) {
  return SplitMix64(base ^ SplitMix64(salt + 0x632BE59BD9B4E019ull));
}

inline std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string HexU64(std::uint64_t value);

}  // namespace thyia
