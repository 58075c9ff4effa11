#pragma once

// Seeded random streams. All randomness in a run flows from one 64-bit master
// seed; each consumer gets its own engine seeded by SplitMix64 over
// (master, stream, index), so the draws one consumer makes never depend on how
// many draws another consumer made or on scheduling order.
//
// Engine: std::mt19937_64 (its output sequence is fixed by the standard).
// Distributions are implemented here because the standard library leaves
// their algorithms unspecified, which would break cross-platform bit-identity.

#include <cstdint>
#include <random>

namespace ipe {

enum class Stream : std::uint64_t {
    Assignment = 1,
    Population = 2,
    Covariates = 3,
    Signals = 4,
    Replicates = 5,
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) : engine_(derive_seed(master, stream, index)) {}

    std::uint64_t next() { return engine_(); }
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Marsaglia polar method; the spare deviate is cached.
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ipe
