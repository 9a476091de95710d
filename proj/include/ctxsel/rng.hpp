#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ctxsel {

// Seedable random stream. All draws are produced from raw mt19937_64 output
// so two builds of the engine replay identical sequences; std:: distributions
// are implementation-defined and deliberately avoided.
//
// Streams are derived per rollout from (base_seed, scene, iteration, rollout)
// so concurrent rollouts never share state and any single rollout can be
// replayed in isolation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  static Rng derive(std::uint64_t base, std::uint64_t scene, std::uint64_t iteration,
                    std::uint64_t rollout) {
    std::uint64_t s = mix(base);
    s = mix(s ^ scene);
    s = mix(s ^ iteration);
    s = mix(s ^ rollout);
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; two uniforms per draw, no cached pair.
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ctxsel
