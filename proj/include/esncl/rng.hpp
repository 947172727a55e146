#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace esncl {

// Deterministic RNG with a fixed uniform mapping. std::uniform_real_distribution
// is implementation-defined, so all draws go through raw 64-bit output here to
// keep runs reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ULL : seed) {
        // warm up splitmix-seeded xoshiro state
        for (int i = 0; i < 4; ++i) s_[i] = splitmix(state_);
    }

    std::uint64_t next_u64() {
        // xoshiro256++
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    static std::uint64_t splitmix(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    std::uint64_t state_;
    std::uint64_t s_[4];
};

/// Derives an independent stream seed for a named component so that adding
/// draws in one component never perturbs another.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view component) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ master;
    for (char c : component) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    // final avalanche
    h ^= h >> 33; h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33; h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return h;
}

} // namespace esncl
