#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bnlab::rmt {

// Limiting density of the squared singular values of X1 X2 ... XM for
// independent N x N Gaussian factors with entry variance 1/N, parametrized by
//   x(phi) = sin^{M+1}((M+1) phi) / (sin(phi) sin^M(M phi)),  0 < phi < pi/(M+1)
//   rho(x) = sin((M+1) phi) sin(phi) / (pi x sin(M phi)).
// M = 1 is Marchenko-Pastur on (0, 4).

// (M+1)^{M+1} / M^M
double support_upper(unsigned m);

double x_of_phi(unsigned m, double phi);
// Inverse of x_of_phi by bisection to machine precision.
double phi_of_x(unsigned m, double x);
double density(unsigned m, double x);
// P(X <= x); 0 below the support, 1 above. Integrates rho(phi) |dx/dphi| in
// phi, where the integrand is bounded at both ends.
double cdf(unsigned m, double x);

double mp_density(double x);
double mp_cdf(double x);

struct SpectrumSample {
    unsigned m = 1;
    std::size_t n = 0;
    std::vector<double> sigmas;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    bool rescaled = true;
    // trials * n values; each trial's block sorted ascending.
    std::vector<double> eigenvalues;

    std::span<const double> trial(std::size_t t) const;
    std::vector<double> sorted() const;
};

// Per trial t (rng stream t of seed): X = X1 ... XM with entries of Xi drawn
// N(0, sigma_i^2 / N); eigenvalues of XᵀX, divided by prod sigma_i^2 when
// rescale is set. Trials run in parallel and do not depend on each other.
SpectrumSample sample_product_spectrum(unsigned m, std::size_t n, std::span<const double> sigmas,
                                       std::size_t trials, std::uint64_t seed, bool rescale = true);

struct ConditionEntry {
    unsigned m = 0;
    std::size_t trial = 0;
    double kappa = 0.0;      // sqrt(lambda_max / lambda_min)
    double sigma_max = 0.0;  // sqrt(lambda_max)
    bool saturated = false;  // lambda_min below 1e-300; kappa is +inf
};

struct ConditionSummary {
    unsigned m = 0;
    std::size_t used = 0;  // non-saturated trials
    std::size_t saturated = 0;
    double kappa_mean = 0.0, kappa_std = 0.0, kappa_median = 0.0;
    double sigma_max_mean = 0.0, sigma_max_std = 0.0, sigma_max_median = 0.0;
};

struct ConditionReport {
    std::vector<ConditionEntry> entries;
    std::vector<ConditionSummary> summaries;  // one per sample, input order
};

ConditionEntry condition_of(std::span<const double> eigenvalues);
ConditionReport condition_report(std::span<const SpectrumSample> samples);

// sup |F_n - F| for a sorted, non-empty sample.
double ks_distance(std::span<const double> sorted, const std::function<double(double)>& cdf);

}  // namespace bnlab::rmt
