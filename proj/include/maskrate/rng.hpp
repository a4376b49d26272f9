// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace maskrate {

/// Mixes an arbitrary number of 64-bit words into one seed (splitmix64 chain).
/// Used to derive per-epoch, per-step and per-sequence streams from a run seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) noexcept;

/// Seeded generator whose outputs are fully specified on every platform.
///
/// The engine is std::mt19937_64 (bit-exact by the standard); the
/// distributions are implemented here because the standard library's
/// distribution algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Bernoulli draw with success probability p.
  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace maskrate
