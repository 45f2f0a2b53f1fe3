#ifndef SURIMI_RNG_HPP
#define SURIMI_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "surimi/common.hpp"

namespace surimi {

// Deterministic RNG used everywhere in the pipeline. Distributions are
// hand-rolled on top of mt19937_64 so that streams are identical across
// platforms and standard-library versions, which keeps seeded artifacts
// byte-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw DomainError("uniform_index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    int uniform_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(uniform_index(
                        static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    // Standard normal via Box-Muller; caches the spare draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Labeled seed derivation: child streams are independent of the order in
// which pipeline stages consume randomness, so adding a stage never
// reshuffles earlier stages.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t h = fnv1a64(&master, sizeof master);
    h = fnv1a64(label, h);
    // splitmix64 finalizer to spread low-entropy labels
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index) {
    return derive_seed(derive_seed(master, label), std::to_string(index));
}

}  // namespace surimi

#endif
