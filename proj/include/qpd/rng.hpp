#pragma once

// Counter-based normal deviates: every draw is a pure function of
// (seed, trajectory, channel, step), so results do not depend on how
// trajectories are distributed over threads.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qpd {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept { return splitmix64(h ^ splitmix64(v)); }

/// Per-trajectory seed derived from the master seed.
constexpr std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return hash_combine(splitmix64(master_seed), index);
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t seed) noexcept : key_(splitmix64(seed)) {}

  /// Uniform in (0, 1) with 53 random bits.
  double uniform(std::uint64_t channel, std::uint64_t step, std::uint64_t lane) const noexcept {
    const std::uint64_t h = hash_combine(hash_combine(hash_combine(key_, channel), step), lane);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal deviate (Box–Muller on two independent lanes).
  double normal(std::uint64_t channel, std::uint64_t step) const noexcept {
    const double u1 = uniform(channel, step, 0);
    const double u2 = uniform(channel, step, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

}  // namespace qpd
