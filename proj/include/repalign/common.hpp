#pragma once

// Shared error types, deterministic RNG, and small numeric helpers used by
// every module. All randomized procedures take explicit 64-bit seeds and
// draw through Rng so that results are reproducible bit-for-bit across runs
// and independent of the number of worker threads.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace repalign {

// Bad inputs: shape mismatches, invalid parameters, malformed files.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Computations that are well-formed but fail numerically: divergence,
// undefined scores, non-convergence of iterative solvers.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// splitmix64 step; used both for seeding and for deriving independent
// per-chunk/per-restart streams from a base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive a substream seed so that (seed, stream) pairs do not collide for
// nearby base seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

// mt19937_64 with self-owned output mappings. The standard distributions are
// implementation-defined, so uniform/normal/index are implemented here to keep
// frozen test values stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        gen_.seed(splitmix64(s));
    }

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (two fresh draws per value)
    double normal() {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // uniform index in [0, n) via 128-bit multiply
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(gen_()) * static_cast<unsigned __int128>(n)) >> 64);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace repalign
