#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bnlab/eigen.hpp"
#include "bnlab/error.hpp"
#include "bnlab/kernels.hpp"
#include "bnlab/rmt.hpp"
#include "bnlab/rng.hpp"
#include "bnlab/tensor.hpp"

namespace bnlab::rmt {

std::span<const double> SpectrumSample::trial(std::size_t t) const {
    if (t >= trials) throw SizeError("trial " + std::to_string(t) + " of " + std::to_string(trials));
    return std::span<const double>(eigenvalues).subspan(t * n, n);
}

std::vector<double> SpectrumSample::sorted() const {
    std::vector<double> out = eigenvalues;
    std::sort(out.begin(), out.end());
    return out;
}

SpectrumSample sample_product_spectrum(unsigned m, std::size_t n, std::span<const double> sigmas,
                                       std::size_t trials, std::uint64_t seed, bool rescale) {
    if (m == 0) throw DomainError("number of factor matrices must be positive");
    if (n < 2) throw SizeError("matrix size must be at least 2");
    if (trials == 0) throw SizeError("at least one trial is required");
    std::vector<double> sig(sigmas.begin(), sigmas.end());
    if (sig.empty()) sig.assign(m, 1.0);
    if (sig.size() != m) throw SizeError("need one sigma per factor matrix");
    for (double s : sig)
        if (!(s > 0.0)) throw ValueError("sigmas must be positive");

    double scale2 = 1.0;
    for (double s : sig) scale2 *= s * s;

    SpectrumSample out{m, n, sig, trials, seed, rescale, std::vector<double>(trials * n)};
    const auto count = static_cast<long long>(trials);
#pragma omp parallel for schedule(dynamic)
    for (long long t = 0; t < count; ++t) {
        SeededRng rng(seed, static_cast<std::uint64_t>(t));
        Tensor product;
        for (unsigned i = 0; i < m; ++i) {
            Tensor f({n, n});
            const double sd = sig[i] / std::sqrt(static_cast<double>(n));
            for (auto& v : f.storage()) v = sd * rng.normal();
            product = (i == 0) ? std::move(f) : kernels::matmul(product, f);
        }
        std::vector<double> ev = gram_eigenvalues(product);
        if (rescale)
            for (auto& v : ev) v /= scale2;
        const auto offset = static_cast<std::ptrdiff_t>(static_cast<std::size_t>(t) * n);
        std::copy(ev.begin(), ev.end(), out.eigenvalues.begin() + offset);
    }
    return out;
}

ConditionEntry condition_of(std::span<const double> eigenvalues) {
    if (eigenvalues.empty()) throw SizeError("condition number of an empty spectrum");
    const auto [lo, hi] = std::minmax_element(eigenvalues.begin(), eigenvalues.end());
    ConditionEntry e;
    e.sigma_max = std::sqrt(*hi);
    if (*lo < 1e-300) {
        e.saturated = true;
        e.kappa = std::numeric_limits<double>::infinity();
    } else {
        e.kappa = std::sqrt(*hi / *lo);
    }
    return e;
}

namespace {

struct Moments {
    double mean = 0.0, std = 0.0, median = 0.0;
};

// Sample standard deviation (n - 1); zero for a single value.
Moments describe(std::vector<double> v) {
    Moments r;
    if (v.empty()) return r;
    const double n = static_cast<double>(v.size());
    for (double x : v) r.mean += x;
    r.mean /= n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(ss / (n - 1.0));
    }
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    r.median = (v.size() % 2) ? v[k] : 0.5 * (v[k - 1] + v[k]);
    return r;
}

}  // namespace

ConditionReport condition_report(std::span<const SpectrumSample> samples) {
    ConditionReport report;
    for (const auto& s : samples) {
        std::vector<double> kappas, sigmas;
        ConditionSummary sum;
        sum.m = s.m;
        for (std::size_t t = 0; t < s.trials; ++t) {
            ConditionEntry e = condition_of(s.trial(t));
            e.m = s.m;
            e.trial = t;
            if (e.saturated) {
                ++sum.saturated;
            } else {
                kappas.push_back(e.kappa);
                sigmas.push_back(e.sigma_max);
            }
            report.entries.push_back(e);
        }
        sum.used = kappas.size();
        const Moments k = describe(kappas), sm = describe(sigmas);
        sum.kappa_mean = k.mean;
        sum.kappa_std = k.std;
        sum.kappa_median = k.median;
        sum.sigma_max_mean = sm.mean;
        sum.sigma_max_std = sm.std;
        sum.sigma_max_median = sm.median;
        report.summaries.push_back(sum);
    }
    return report;
}

double ks_distance(std::span<const double> sorted, const std::function<double(double)>& cdf) {
    if (sorted.empty()) throw SizeError("KS distance of an empty sample");
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0 && sorted[i] < sorted[i - 1]) throw ValueError("KS sample must be sorted ascending");
        const double f = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace bnlab::rmt
