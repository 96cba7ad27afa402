#include "bnlab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bnlab/error.hpp"
#include "bnlab/rng.hpp"

namespace bnlab::noise {

GradientSet::GradientSet(std::vector<std::vector<double>> per_example) : grads_(std::move(per_example)) {
    if (grads_.empty()) throw SizeError("gradient set needs at least one example");
    const std::size_t d = grads_.front().size();
    mean_.assign(d, 0.0);
    for (const auto& g : grads_) {
        if (g.size() != d) throw DimensionError("per-example gradients differ in length");
        for (std::size_t j = 0; j < d; ++j) mean_[j] += g[j];
    }
    const double n = static_cast<double>(grads_.size());
    for (auto& v : mean_) v /= n;
}

double GradientSet::deviation_sum() const {
    double s = 0.0;
    for (const auto& g : grads_)
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double d = g[j] - mean_[j];
            s += d * d;
        }
    return s;
}

LeastSquaresModel::LeastSquaresModel(Tensor x, std::vector<double> y, std::vector<double> w)
    : x_(std::move(x)), y_(std::move(y)), w_(std::move(w)) {
    if (x_.rank() != 2 || x_.dim(0) != y_.size() || x_.dim(1) != w_.size())
        throw DimensionError("least squares expects x [N, d], y [N], w [d]");
}

std::vector<double> LeastSquaresModel::gradient(std::size_t i) {
    if (i >= y_.size()) throw SizeError("example index out of range");
    const std::size_t d = w_.size();
    const double* xi = x_.data().data() + i * d;
    double r = -y_[i];
    for (std::size_t j = 0; j < d; ++j) r += w_[j] * xi[j];
    std::vector<double> g(d);
    for (std::size_t j = 0; j < d; ++j) g[j] = 2.0 * r * xi[j];
    return g;
}

NetworkModel::NetworkModel(nn::Network& net, const Tensor& x, std::span<const int> labels)
    : net_(net), x_(x), labels_(labels) {
    if (x_.rank() < 2 || x_.dim(0) != labels_.size())
        throw DimensionError("network model expects one label per example");
}

std::vector<double> NetworkModel::gradient(std::size_t i) {
    if (i >= labels_.size()) throw SizeError("example index out of range");
    Shape one = x_.shape();
    one[0] = 1;
    const std::size_t stride = x_.size() / x_.dim(0);
    const auto first = x_.storage().begin() + static_cast<std::ptrdiff_t>(i * stride);
    Tensor xi(one, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride)));
    net_.compute_gradients(xi, labels_.subspan(i, 1), nn::Mode::probe);
    return net_.flat_gradient();
}

GradientSet per_example_gradients(PerExampleModel& model) {
    std::vector<std::vector<double>> grads;
    grads.reserve(model.count());
    for (std::size_t i = 0; i < model.count(); ++i) grads.push_back(model.gradient(i));
    return GradientSet(std::move(grads));
}

double noise_constant(const GradientSet& grads) {
    return grads.deviation_sum() / static_cast<double>(grads.size());
}

Sampling parse_sampling(std::string_view name) {
    if (name == "with_replacement") return Sampling::with_replacement;
    if (name == "without_replacement") return Sampling::without_replacement;
    throw ValueError("unknown sampling mode '" + std::string(name) + "'");
}

std::string_view to_string(Sampling mode) {
    return mode == Sampling::with_replacement ? "with_replacement" : "without_replacement";
}

namespace {

void check_batch(const GradientSet& grads, std::size_t b) {
    if (b < 1 || b > grads.size())
        throw SizeError("batch size " + std::to_string(b) + " outside [1, " + std::to_string(grads.size()) + "]");
}

}  // namespace

MonteCarlo empirical_sgd_noise(const GradientSet& grads, std::size_t b, double alpha, std::size_t trials,
                               std::uint64_t seed, Sampling mode) {
    check_batch(grads, b);
    if (trials == 0) throw SizeError("at least one trial is required");
    const std::size_t n = grads.size(), d = grads.dim();
    const auto mean = grads.mean();

    std::vector<double> values(trials);
    const auto count = static_cast<long long>(trials);
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < count; ++t) {
        SeededRng rng(seed, static_cast<std::uint64_t>(t));
        std::vector<std::size_t> batch(b);
        if (mode == Sampling::with_replacement) {
            for (auto& i : batch) i = rng.uniform_index(n);
        } else {
            std::vector<std::size_t> pool(n);
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            for (std::size_t k = 0; k < b; ++k) {
                const std::size_t j = k + rng.uniform_index(n - k);
                std::swap(pool[k], pool[j]);
            }
            std::copy(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(b), batch.begin());
        }
        // Index order, so a full batch reproduces the mean bit for bit.
        std::sort(batch.begin(), batch.end());
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t i : batch) s += grads.gradient(i)[j];
            const double diff = mean[j] - s / static_cast<double>(b);
            sq += diff * diff;
        }
        values[static_cast<std::size_t>(t)] = sq;
    }

    double sum = 0.0;
    for (double v : values) sum += v;
    const double avg = sum / static_cast<double>(trials);
    double ss = 0.0;
    for (double v : values) ss += (v - avg) * (v - avg);
    const double a2 = alpha * alpha;
    MonteCarlo r;
    r.mean = a2 * avg;
    if (trials > 1) r.std_err = a2 * std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials));
    return r;
}

double closed_form_noise(const GradientSet& grads, std::size_t b, double alpha) {
    check_batch(grads, b);
    const double n = static_cast<double>(grads.size()), bb = static_cast<double>(b);
    return alpha * alpha * (n - bb) / (bb * n * n) * grads.deviation_sum();
}

double exact_noise(const GradientSet& grads, std::size_t b, double alpha, Sampling mode) {
    check_batch(grads, b);
    const double n = static_cast<double>(grads.size()), bb = static_cast<double>(b);
    const double c = noise_constant(grads);
    if (mode == Sampling::with_replacement) return alpha * alpha * c / bb;
    if (grads.size() == 1) return 0.0;
    return alpha * alpha * c * (n - bb) / (bb * (n - 1.0));
}

NoiseEstimate estimate_noise(const GradientSet& grads, std::size_t b, double alpha, std::size_t trials,
                             std::uint64_t seed, Sampling mode) {
    const MonteCarlo mc = empirical_sgd_noise(grads, b, alpha, trials, seed, mode);
    NoiseEstimate e;
    e.alpha = alpha;
    e.b = b;
    e.mode = mode;
    e.c = noise_constant(grads);
    e.empirical = mc.mean;
    e.std_err = mc.std_err;
    e.exact = exact_noise(grads, b, alpha, mode);
    e.closed_form = closed_form_noise(grads, b, alpha);
    e.bound = alpha * alpha * e.c / static_cast<double>(b);
    return e;
}

}  // namespace bnlab::noise
