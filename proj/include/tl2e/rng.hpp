#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tl2e {

/// Mixes an arbitrary list of 64-bit words into one seed (splitmix64 finalizer).
/// Used to derive independent per-(condition, replicate, fold) streams from a
/// master seed without coupling between streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t x, std::uint64_t y, Rest... rest) {
    return mix_seed(mix_seed(x) ^ (y + 0x9e3779b97f4a7c15ULL), rest...);
}

/// Deterministic random stream. The raw engine is std::mt19937_64 (its output
/// sequence is pinned by the standard); all real-valued draws are derived here
/// rather than through std::*_distribution, whose sequences are
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the draw exactly uniform
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace tl2e
