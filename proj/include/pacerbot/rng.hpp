// Seeded deterministic RNG for all stochastic pieces of the simulator.
//
// splitmix64 core with a Box-Muller Gaussian on top. The standard-library
// distributions are implementation-defined, so a run seeded the same way
// would not be byte-reproducible across toolchains; this one is.
#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

#include "pacerbot/common.hpp"

namespace pacerbot {

namespace detail {
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() { return detail::splitmix64_next(state_); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller; the pair's second value is cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double std) { return mean + std * gaussian(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    template <typename T>
    void shuffle(T* data, std::size_t n) {
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            T tmp = data[i - 1];
            data[i - 1] = data[j];
            data[j] = tmp;
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent stream seed from (master, tag, indices).
/// FNV-1a over the inputs, then one avalanche round. This is the splitting
/// rule used everywhere runs fan out (participants, conditions, subsystems).
inline std::uint64_t split_seed(std::uint64_t master, std::string_view tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix_byte = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 0x100000001B3ULL;
    };
    auto mix_u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) mix_byte(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    mix_u64(master);
    for (char c : tag) mix_byte(static_cast<std::uint8_t>(c));
    mix_u64(a);
    mix_u64(b);
    return detail::splitmix64_next(h);
}

}  // namespace pacerbot
