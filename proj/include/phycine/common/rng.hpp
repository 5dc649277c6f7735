#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace phycine {

// Deterministic splitmix64 generator. std:: distributions are
// implementation-defined, so episode generation and parameter init go through
// this to stay bit-identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n); n > 0
    int uniform_int(int n) {
        return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        // Box-Muller; uniform() < 1 so the log argument stays positive.
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    h *= 0xFF51AFD7ED558CCDULL;
    h ^= h >> 33;
    return h;
}

// Stable seed derivation for named substreams, e.g.
// derive_seed({seed, stage, iteration, role}). Makes checkpoint resume
// trivially bitwise-exact: randomness depends on coordinates, not history.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x5851F42D4C957F2DULL;
    for (std::uint64_t p : parts) h = hash_mix(h, p);
    return h;
}

}  // namespace phycine
