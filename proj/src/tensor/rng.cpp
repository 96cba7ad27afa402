#include "bnlab/rng.hpp"

#include <cmath>
#include <numbers>

#include "bnlab/error.hpp"

namespace bnlab {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream))) {}

double SeededRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SeededRng::uniform_open() {
    double u;
    do {
        u = uniform();
    } while (u == 0.0);
    return u;
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
    if (n == 0) throw ValueError("uniform_index requires n > 0");
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double SeededRng::laplace(double scale) {
    const double u = uniform_open() - 0.5;
    return (u < 0 ? scale : -scale) * std::log(1.0 - 2.0 * std::fabs(u));
}

SeededRng SeededRng::derive(std::uint64_t child) const {
    return SeededRng(splitmix64(seed_ ^ splitmix64(stream_ + 0x632be59bd9b4e019ULL)), child);
}

}  // namespace bnlab
