#ifndef CLM_RNG_HPP
#define CLM_RNG_HPP

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "clm/vec.hpp"

namespace clm {

// FNV-1a, used both for named RNG streams and for ledger spec digests.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 14695981039346656037ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

using Rng = std::mt19937_64;

// Derives an independent stream from a root seed and a stream name, so that
// adding one consumer does not perturb the draws seen by the others.
inline Rng named_stream(std::uint64_t root_seed, std::string_view name) {
    return Rng(fnv1a(name, root_seed ^ 0x9e3779b97f4a7c15ULL));
}

// Uniform in [0,1). Explicit bit arithmetic instead of a distribution object
// keeps the byte stream identical across standard library versions.
inline double u01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * u01(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(u01(rng) * static_cast<double>(n)) % n;
}

inline double gaussian(Rng& rng) {
    // Box-Muller; deterministic for a given engine state.
    double u1 = u01(rng);
    double u2 = u01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline Vec random_in_box(Rng& rng, const Vec& lo, const Vec& hi) {
    Vec r(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) r[i] = uniform(rng, lo[i], hi[i]);
    return r;
}

// Random point of the n-simplex via normalized exponentials.
inline Vec random_simplex(Rng& rng, std::size_t n) {
    Vec r(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = -std::log(std::max(u01(rng), 1e-300));
        total += r[i];
    }
    for (double& v : r) v /= total;
    return r;
}

}  // namespace clm

#endif
