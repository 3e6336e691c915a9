#pragma once

#include <cstdint>
#include <random>

namespace fedbdpl {

// splitmix64 step; used to derive independent seeds from (seed, stream ids).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(seed);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return s;
}

// Deterministic random source. All stochastic operations take one of these
// explicitly, so replays with the same seed are bitwise identical.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform draw restricted to the open interval (0,1).
    double uniform_open01() {
        std::uniform_real_distribution<double> d(0.0, 1.0);
        double u;
        do {
            u = d(gen_);
        } while (u <= 0.0);
        return u;
    }

    double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    double gaussian(double stddev) {
        if (stddev <= 0.0) return 0.0;
        return std::normal_distribution<double>(0.0, stddev)(gen_);
    }

    double gamma(double shape) {
        return std::gamma_distribution<double>(shape, 1.0)(gen_);
    }

    std::uint64_t next_u64() { return gen_(); }

    // Integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace fedbdpl
