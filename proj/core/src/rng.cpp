#include "safepatch/rng.hpp"

#include <cmath>

#include "safepatch/error.hpp"

namespace safepatch {

namespace {

inline uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline double to_unit(uint64_t x) {
    // 53 significant bits -> [0, 1)
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

} // namespace

uint64_t rng_word(uint64_t seed, uint64_t counter, uint64_t lane) {
    uint64_t k = mix64(seed) ^ (lane * 0xD1342543DE82EF95ull);
    return mix64(mix64(k ^ counter) + 0x2545F4914F6CDD1Dull * lane);
}

uint64_t Rng::next_u64() {
    return rng_word(seed, counter++, 0);
}

double Rng::next_uniform() {
    return to_unit(next_u64());
}

uint64_t Rng::next_below(uint64_t n) {
    if (n == 0) throw ContractError("next_below: n must be positive");
    // Multiply-shift rejection-free mapping; bias is < 2^-53 for toy-scale n.
    return static_cast<uint64_t>(next_uniform() * static_cast<double>(n)) % n;
}

double portable_log(double x) {
    // x = m * 2^e with m in [0.5, 1); ln x = e*ln2 + 2*atanh((m-1)/(m+1)).
    int e = 0;
    double m = std::frexp(x, &e);
    const double t = (m - 1.0) / (m + 1.0);
    const double t2 = t * t;
    // |t| <= 1/3, so the series gains >= ~0.95 digits per term.
    double term = t;
    double sum = t;
    for (int k = 3; k <= 37; k += 2) {
        term *= t2;
        sum += term / static_cast<double>(k);
    }
    constexpr double kLn2 = 0.6931471805599453094172321214581766;
    return static_cast<double>(e) * kLn2 + 2.0 * sum;
}

double Rng::next_normal() {
    // Polar method confined to this counter's private lane stream: the
    // rejection loop indexes lanes, so one normal costs exactly one counter.
    const uint64_t c = counter++;
    for (uint64_t k = 1;; k += 2) {
        const double u = 2.0 * to_unit(rng_word(seed, c, k)) - 1.0;
        const double v = 2.0 * to_unit(rng_word(seed, c, k + 1)) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            return u * std::sqrt(-2.0 * portable_log(s) / s);
        }
    }
}

Rng Rng::fork(uint64_t tag) const {
    return Rng(rng_word(seed, 0x5AFEC0DE, tag), 0);
}

} // namespace safepatch
