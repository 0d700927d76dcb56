#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace census {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for (seed, index, purpose).
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t purpose = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (purpose * 0xD1B54A32D192ED03ULL));
}

using Rng = std::mt19937_64;

// Distribution helpers written out so results do not depend on the standard
// library's unspecified sampling algorithms.

/// Uniform in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [lo, hi] by rejection.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::int64_t>(rng());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    return lo + static_cast<std::int64_t>(r % span);
}

inline double standard_normal(Rng& rng) {
    // Marsaglia polar method
    for (;;) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// Knuth's multiplication method; fine for the small means used here.
inline std::uint64_t poisson(Rng& rng, double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 30.0) {
        const double v = std::round(mean + std::sqrt(mean) * standard_normal(rng));
        return v < 0.0 ? 0 : static_cast<std::uint64_t>(v);
    }
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = uniform01(rng);
    while (p > limit) {
        ++k;
        p *= uniform01(rng);
    }
    return k;
}

/// Marsaglia-Tsang, shape >= 1 directly and boosted below 1.
inline double gamma_draw(Rng& rng, double shape) {
    if (shape < 1.0) return gamma_draw(rng, shape + 1.0) * std::pow(uniform01(rng), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0, v = 0.0;
        do {
            x = standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01(rng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline double beta_draw(Rng& rng, double a, double b) {
    const double x = gamma_draw(rng, a);
    const double y = gamma_draw(rng, b);
    return x / (x + y);
}

/// Fisher-Yates with uniform_int, portable across standard libraries.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace census
