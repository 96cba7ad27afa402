#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bnlab/nn/network.hpp"
#include "bnlab/tensor.hpp"

namespace bnlab::noise {

// Per-example gradients g_i (flattened over every parameter group) and their
// mean. Immutable once built.
class GradientSet {
public:
    explicit GradientSet(std::vector<std::vector<double>> per_example);

    std::size_t size() const noexcept { return grads_.size(); }
    std::size_t dim() const noexcept { return mean_.size(); }
    std::span<const double> gradient(std::size_t i) const { return grads_.at(i); }
    std::span<const double> mean() const noexcept { return mean_; }

    // sum_i |g_i - mean|^2
    double deviation_sum() const;

private:
    std::vector<std::vector<double>> grads_;
    std::vector<double> mean_;
};

class PerExampleModel {
public:
    virtual ~PerExampleModel() = default;
    virtual std::size_t count() const = 0;
    virtual std::vector<double> gradient(std::size_t i) = 0;
};

// l_i(w) = (wᵀx_i - y_i)^2, so grad l_i = 2 (wᵀx_i - y_i) x_i.
class LeastSquaresModel : public PerExampleModel {
public:
    LeastSquaresModel(Tensor x, std::vector<double> y, std::vector<double> w);

    std::size_t count() const override { return y_.size(); }
    std::vector<double> gradient(std::size_t i) override;

private:
    Tensor x_;  // [N, d]
    std::vector<double> y_;
    std::vector<double> w_;
};

// Each example runs as a batch of one, with batch statistics and no state
// updates. Batch-normalized dense layers therefore cannot be used here.
class NetworkModel : public PerExampleModel {
public:
    NetworkModel(nn::Network& net, const Tensor& x, std::span<const int> labels);

    std::size_t count() const override { return labels_.size(); }
    std::vector<double> gradient(std::size_t i) override;

private:
    nn::Network& net_;
    const Tensor& x_;
    std::span<const int> labels_;
};

GradientSet per_example_gradients(PerExampleModel& model);

// C = (1/N) sum_i |g_i - mean|^2
double noise_constant(const GradientSet& grads);

enum class Sampling { with_replacement, without_replacement };

Sampling parse_sampling(std::string_view name);
std::string_view to_string(Sampling mode);

struct MonteCarlo {
    double mean = 0.0;
    double std_err = 0.0;
};

// Mean over trials of alpha^2 |mean - (1/b) sum_{i in B} g_i|^2 for random
// batches B of size b. Trial t draws from rng stream t of seed.
MonteCarlo empirical_sgd_noise(const GradientSet& grads, std::size_t b, double alpha, std::size_t trials,
                               std::uint64_t seed, Sampling mode = Sampling::with_replacement);

// alpha^2 (N - b) / (b N^2) sum_i |g_i - mean|^2
double closed_form_noise(const GradientSet& grads, std::size_t b, double alpha);

// Exact expectation of the sampled noise: alpha^2 C / b with replacement,
// alpha^2 C (N - b) / (b (N - 1)) without.
double exact_noise(const GradientSet& grads, std::size_t b, double alpha, Sampling mode);

struct NoiseEstimate {
    double alpha = 0.0;
    std::size_t b = 0;
    Sampling mode = Sampling::with_replacement;
    double c = 0.0;
    double empirical = 0.0;
    double std_err = 0.0;
    double exact = 0.0;
    double closed_form = 0.0;
    double bound = 0.0;  // alpha^2 C / b
};

NoiseEstimate estimate_noise(const GradientSet& grads, std::size_t b, double alpha, std::size_t trials,
                             std::uint64_t seed, Sampling mode);

}  // namespace bnlab::noise
