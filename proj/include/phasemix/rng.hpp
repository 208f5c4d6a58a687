#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>

namespace phasemix {

/// 64-bit finalizer from SplitMix64.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for (master, label). Labels are hashed with FNV-1a and mixed
/// with the master seed through two SplitMix64 rounds, so a single replica
/// can be rerun from `seed_derive(master, "replica/7/updates")` alone.
std::uint64_t seed_derive(std::uint64_t master, std::string_view label);

/// Hands out child seeds and rejects a label that was already used.
class SeedRegistry {
 public:
  explicit SeedRegistry(std::uint64_t master) : master_(master) {}

  std::uint64_t derive(std::string_view label);
  std::uint64_t master() const noexcept { return master_; }

 private:
  std::uint64_t master_;
  std::unordered_set<std::string> used_;
};

/// Thin wrapper over std::mt19937_64 with the conversions used by the
/// samplers. All conversions are spelled out here so outputs are identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

  int fair_sign() { return (engine_() >> 63) ? 1 : -1; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace phasemix
