#pragma once

#include <cstdint>
#include <cmath>

namespace airkrig {

/// Counter-based splittable RNG (SplitMix64 core).
///
/// Every consumer of randomness in the library derives its own stream from an
/// explicit seed, so results are bit-reproducible across runs and platforms.
/// Streams are cheap value types; `split` derives an independent child stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // Bounded rejection-free mapping; bias is < 2^-53 for the n used here.
        return static_cast<std::uint64_t>(next_double() * static_cast<double>(n));
    }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Standard normal via Box-Muller.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Derive an independent child stream keyed by `key`.
    Rng split(std::uint64_t key) const {
        Rng mix(state_ ^ (0xD2B74407B1CE6E93ull * (key + 1)));
        std::uint64_t s = mix.next_u64();
        return Rng(s);
    }

private:
    std::uint64_t state_;
};

}  // namespace airkrig
