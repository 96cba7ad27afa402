#pragma once

#include <cstdint>
#include <random>

namespace bnlab {

// Reproducible random source keyed by (seed, stream). The engine is
// std::mt19937_64, whose output is fixed by the standard; the distributions are
// written out here because the std:: ones are implementation-defined.
class SeededRng {
public:
    SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    std::uint64_t next_u64() { return engine_(); }
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Uniform on (0, 1).
    double uniform_open();
    // Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    double laplace(double scale = 1.0);
    bool bernoulli(double p) { return uniform() < p; }

    // Independent child stream, e.g. one per trial or per sweep leg.
    SeededRng derive(std::uint64_t child) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace bnlab
