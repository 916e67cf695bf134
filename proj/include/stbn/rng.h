#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace stbn {

// SplitMix64 finalizer; used to derive independent stream seeds from a
// master seed and a counter.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0) {
    return mix64(mix64(mix64(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

// MT19937-64 with platform-independent conversions. The standard engine is
// bit-exact across implementations; the std:: distributions are not, so the
// variates are derived here.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    Rng(uint64_t master, uint64_t stream, uint64_t counter = 0)
        : engine_(derive_seed(master, stream, counter)) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // Lemire-free rejection; n is small everywhere it is used.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    // Standard normal via Box-Muller (no cached second variate, so the
    // stream position only depends on the number of calls).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace stbn
