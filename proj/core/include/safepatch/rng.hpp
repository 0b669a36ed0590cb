#pragma once

#include <cstdint>
#include <vector>

namespace safepatch {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so streams can be replayed, split per worker, and are identical across
// platforms. Normal deviates use the polar method with an arithmetic-only
// log so no libm transcendental enters the result.
struct Rng {
    uint64_t seed = 0;
    uint64_t counter = 0;

    explicit Rng(uint64_t s = 0, uint64_t c = 0) : seed(s), counter(c) {}

    // Next raw 64-bit word; advances the counter by one draw unit.
    uint64_t next_u64();

    // Uniform in [0, 1) with 53-bit resolution.
    double next_uniform();

    // Uniform integer in [0, n); n must be > 0.
    uint64_t next_below(uint64_t n);

    // Standard normal deviate. One draw unit per call.
    double next_normal();

    // Derived independent stream; does not advance this generator.
    Rng fork(uint64_t tag) const;
};

// Raw word at an explicit (seed, counter, lane) coordinate.
uint64_t rng_word(uint64_t seed, uint64_t counter, uint64_t lane);

// Natural log via range reduction + atanh series; IEEE arithmetic only,
// bit-stable across conforming platforms. Accurate to ~1 ulp for x in (0, 2].
double portable_log(double x);

} // namespace safepatch
