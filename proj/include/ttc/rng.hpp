#pragma once

#include <cstdint>
#include <random>

namespace ttc {

// Deterministic random source used everywhere in the library.
//
// Engine: std::mt19937_64 (fully specified by the standard, so streams are
// reproducible across platforms for a given 64-bit seed). On top of the raw
// words we implement our own scalar transforms instead of the <random>
// distributions, whose output sequences are implementation-defined:
//   - uniform01(): ((word >> 11) + 1) * 2^-53, a double in (0, 1]
//   - normal():    Box-Muller pair on two uniforms, second value cached
//   - uniform_index(n): multiply-shift ((unsigned __int128)word * n) >> 64
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t word() { return engine_(); }

    // Uniform double in (0, 1]; never returns 0 so log() is safe.
    double uniform01() {
        return static_cast<double>((word() >> 11) + 1) * 0x1.0p-53;
    }

    double normal();

    // Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((u128(word()) * u128(n)) >> 64);
    }

    // Sum of k squared standard normals (chi-squared with k degrees of freedom).
    double chi_squared(int k);

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// SplitMix64 finalizer; the building block for derived seeds.
std::uint64_t mix64(std::uint64_t x);

// Derived seed for a keyed subexperiment: fold each key into the running
// state with mix64. derive_seed(s, a, b) != derive_seed(s, b, a) in general,
// and the chain is documented so runs can be reproduced piecemeal.
inline std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key, Rest... rest) {
    return derive_seed(mix64(seed + 0x9e3779b97f4a7c15ULL * (key + 1)), rest...);
}

} // namespace ttc
