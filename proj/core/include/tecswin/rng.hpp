#pragma once

#include <cstdint>
#include <cmath>

namespace tecswin {

// Counter-based deterministic generator: each output is the SplitMix64
// finalizer applied to (seed, counter). Identical seed gives an identical
// stream on every platform. Gaussians come from Box-Muller without caching,
// so the stream position is a pure function of how many draws were made.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), counter_(0) {}

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }

    uint64_t next_u64() {
        uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (counter_++ + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller (two uniforms per draw, no cache)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // independent child stream, for decoupling consumers
    Rng fork(uint64_t salt) const {
        uint64_t z = seed_ ^ (0xD1B54A32D192ED03ULL * (salt + 1));
        z = (z ^ (z >> 29)) * 0xFF51AFD7ED558CCDULL;
        z = (z ^ (z >> 32)) * 0xC4CEB9FE1A85EC53ULL;
        return Rng(z ^ (z >> 32));
    }

private:
    uint64_t seed_;
    uint64_t counter_;
};

}  // namespace tecswin
