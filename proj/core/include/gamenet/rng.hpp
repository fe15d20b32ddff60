#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace gamenet {

/// Seeded generator with platform-independent sampling.
///
/// std::*_distribution output is implementation-defined, so uniform, normal and
/// index sampling are derived directly from the mt19937_64 bit stream. Two Rng
/// objects with the same seed produce the same sequence on every toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Box-Muller, no cached second value).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Uniform integer in [0, n). n must be > 0.
    std::size_t index(std::size_t n);
    /// Independent child generator seeded from this stream.
    Rng fork() { return Rng(next()); }

    template <class T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[index(i)]);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace gamenet
