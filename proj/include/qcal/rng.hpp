#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "qcal/common.hpp"

namespace qcal {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

// Stable child-seed derivation: child = hash(master, purpose tag, index).
// Used everywhere a parallel unit of work needs its own stream, so that
// serial and parallel runs agree bitwise.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
    std::uint64_t x = detail::splitmix64(master ^ detail::fnv1a(tag));
    return detail::splitmix64(x ^ detail::splitmix64(index));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Multinomial draw by conditional binomials: outcome k is Binomial over the
// shots not yet assigned, with success probability p_k renormalised to the
// remaining mass. Exact and O(D) per call independent of n.
inline std::vector<std::int64_t> multinomial_sample(Rng& rng, const std::vector<double>& probs,
                                                    std::int64_t n) {
    require(n >= 0, "multinomial_sample: n must be >= 0");
    std::vector<std::int64_t> counts(probs.size(), 0);
    std::int64_t remaining = n;
    double mass_left = 1.0;
    for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
        double p = probs[k];
        if (p <= 0.0) continue;
        double ratio = (mass_left > 0.0) ? p / mass_left : 1.0;
        if (ratio >= 1.0) {
            counts[k] = remaining;
            remaining = 0;
            break;
        }
        std::binomial_distribution<std::int64_t> binom(remaining, ratio);
        counts[k] = binom(rng);
        remaining -= counts[k];
        mass_left -= p;
    }
    if (!probs.empty() && remaining > 0) counts.back() += remaining;
    return counts;
}

// Inverse-CDF draw of an index from discrete weights that sum to ~1.
inline std::size_t sample_index(Rng& rng, const std::vector<double>& weights) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u = uni(rng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    bool seen = false;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] <= 0.0) continue;
        acc += weights[j];
        last_positive = j;
        seen = true;
        if (u < acc) return j;
    }
    require(seen, "sample_index: all weights are zero");
    return last_positive;  // u landed in the round-off tail
}

}  // namespace qcal
