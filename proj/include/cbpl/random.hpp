#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace cbpl {

/// Seeded random stream. Sampling is implemented here rather than through
/// std distributions so that streams are reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    /// Draws an index according to a probability vector (entries need not sum exactly to 1).
    std::size_t categorical(std::span<const double> probs);

    /// Unit-rate exponential draw; used to build Dirichlet(1, ..., 1) samples.
    double exponential();

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent seed for a named component stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

}  // namespace cbpl
