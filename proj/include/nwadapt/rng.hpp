#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace nwadapt {

// xoshiro256** (Blackman & Vigna), state seeded by running splitmix64 over
// the 64-bit seed. All derived quantities (uniform reals, bounded integers,
// Gaussian samples) are computed here with integer arithmetic and plain
// libm calls.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent stream keyed by (seed, keys...). Used for per-epoch,
  // per-sample and per-branch generators.
  static Rng derived(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& x);

}  // namespace nwadapt
