#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace bindelta {

/// Deterministic random stream built on splitmix64/xoshiro-style mixing.
///
/// The standard <random> engines are deterministic, but the distribution
/// adapters are implementation-defined; every draw here is specified down
/// to the bit so that seeded runs reproduce exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // Warm up so that small seeds decorrelate quickly.
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo bias is irrelevant at these ranges, but the
        // widening multiply trick is cheap and exact enough for n << 2^32.
        return std::uint64_t((__uint128_t(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (cached second value).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(t);
        have_cached_ = true;
        return r * std::cos(t);
    }

    /// Independent child stream for a named purpose. Forking never advances
    /// or disturbs the parent sequence.
    Rng fork(std::string_view tag) const {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ state_;
        for (char c : tag) {
            h ^= std::uint64_t(static_cast<unsigned char>(c));
            h *= 0x100000001b3ULL;
        }
        return Rng(h);
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace bindelta
