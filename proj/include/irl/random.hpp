#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace irl {

/// All stochastic operations take an explicit stream so that every run is a
/// pure function of its seed.
using RandomStream = std::mt19937_64;

/// splitmix64 finalizer (Vigna). Used as the mixing step of the seed scheme.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Splittable seed derivation: feeds each component through splitmix64 in
/// turn. hash64(master, run, sweep) gives independent, order-insensitive
/// per-run seeds; hash64(run_seed, salt) splits a run seed into sub-streams.
constexpr std::uint64_t hash64(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return h;
}

inline RandomStream make_stream(std::uint64_t seed) { return RandomStream(seed); }

inline double sample_uniform(RandomStream& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool sample_bernoulli(double p, RandomStream& rng) {
    return sample_uniform(rng) < p;
}

/// Draws an index from a discrete distribution given as a probability row.
/// The row is assumed normalized; floating-point slack in the cumulative sum
/// falls through to the last index with positive mass.
inline std::size_t sample_index(std::span<const double> probs, RandomStream& rng) {
    if (probs.empty()) throw std::invalid_argument("sample_index: empty distribution");
    const double u = sample_uniform(rng);
    double cum = 0.0;
    std::size_t last_positive = 0;
    bool seen_positive = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
            last_positive = i;
            seen_positive = true;
        }
        cum += probs[i];
        if (u < cum) return i;
    }
    if (!seen_positive) throw std::invalid_argument("sample_index: all-zero distribution");
    return last_positive;
}

inline double sample_gamma(double shape, double rate, RandomStream& rng) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

/// Beta(a, b) via the ratio of two gamma draws.
inline double sample_beta(double a, double b, RandomStream& rng) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    if (x + y == 0.0) return 0.5;  // both underflowed; vanishing-probability event
    return x / (x + y);
}

}  // namespace irl
