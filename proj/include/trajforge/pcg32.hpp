#pragma once

#include <cstdint>

namespace trajforge {

// Minimal PCG32 (XSH-RR 64/32). A fixed algorithm keeps seeded draws
// reproducible across platforms and standard-library versions, which the
// task perturbation and rollout scripting contracts require.
class Pcg32 {
 public:
  explicit Pcg32(uint64_t seed, uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(uint64_t seed, uint64_t stream = 0) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    const uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  uint64_t next_u64() {
    const uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Unbiased draw in [0, bound) by rejecting the low residue range.
  uint32_t next_below(uint32_t bound) {
    if (bound <= 1) return 0;
    const uint32_t threshold = (0u - bound) % bound;
    for (;;) {
      const uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1) with 32 bits of resolution.
  double next_double() { return next_u32() * (1.0 / 4294967296.0); }

 private:
  uint64_t state_ = 0;
  uint64_t inc_ = 1;
};

}  // namespace trajforge
