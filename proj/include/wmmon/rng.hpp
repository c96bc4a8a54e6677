#pragma once

#include <cmath>
#include <cstdint>

namespace wmmon {

// splitmix64: tiny, fully specified generator. Used both as a stream RNG and
// as a stateless counter-based hash for reproducible sensor noise, so that
// outputs depend only on (seed, counter) and never on call order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // one warmup draw decorrelates small consecutive seeds
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // modulo bias is < 2^-50 for the ranges used here (episode counts, indices)
        return next_u64() % n;
    }

    // standard normal via Box-Muller; avoids std::normal_distribution which is
    // not specified bit-exactly by the standard
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stateless standard-normal draw keyed by (seed, counter pair). Deterministic
// regardless of evaluation order; used for per-step per-dimension sensor noise.
inline double keyed_gaussian(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2) {
    std::uint64_t s = hash_combine(hash_combine(seed, k1), k2);
    double u1 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    while (u1 <= 0.0) u1 = static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace wmmon
