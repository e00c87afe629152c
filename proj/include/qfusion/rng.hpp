#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qfusion {

/// splitmix64 step: advances `state` and returns the next output word.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Mixes a seed with stream identifiers so independent consumers (init,
/// dropout, shuffling, ...) get decorrelated but reproducible streams.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream_id,
                                        std::uint64_t counter = 0) {
    std::uint64_t s = seed;
    splitmix64_next(s);
    s ^= 0xD1B54A32D192ED03ULL * (stream_id + 1);
    splitmix64_next(s);
    s ^= 0x8CB92BA72F3D8DD7ULL * (counter + 1);
    splitmix64_next(s);
    return s;
}

/// xoshiro256** generator, state expanded from a 64-bit seed via splitmix64.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed = 1) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64_next(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n) via 128-bit multiply-shift.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (one value per call, no caching,
    /// keeps the stream position a pure function of the call count).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

/// Fisher-Yates shuffle over `n` indices written into `out[0..n)`.
template <typename IndexT>
void fill_permutation(IndexT* out, std::size_t n, Xoshiro256& rng) {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<IndexT>(i);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(out[i - 1], out[j]);
    }
}

}  // namespace qfusion
