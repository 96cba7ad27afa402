#include "bnlab/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bnlab/error.hpp"

namespace bnlab::nn {

namespace {

void check(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw DimensionError("logits must be [b, K], got " + shape_string(logits.shape()));
    if (labels.size() != logits.dim(0))
        throw DimensionError("label count " + std::to_string(labels.size()) + " does not match batch " +
                             std::to_string(logits.dim(0)));
    const auto k = static_cast<int>(logits.dim(1));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= k)
            throw LabelError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                             " outside [0, " + std::to_string(k) + ")");
}

}  // namespace

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw DimensionError("softmax expects [b, K]");
    const std::size_t nb = logits.dim(0), k = logits.dim(1);
    Tensor p(logits.shape());
    for (std::size_t b = 0; b < nb; ++b) {
        const double* z = logits.data().data() + b * k;
        double* out = &p[b * k];
        const double mx = *std::max_element(z, z + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            out[j] = std::exp(z[j] - mx);
            sum += out[j];
        }
        for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
    }
    return p;
}

SoftmaxXent softmax_xent(const Tensor& logits, std::span<const int> labels) {
    check(logits, labels);
    const std::size_t nb = logits.dim(0), k = logits.dim(1);
    SoftmaxXent r{0.0, Tensor(logits.shape())};
    for (std::size_t b = 0; b < nb; ++b) {
        const double* z = logits.data().data() + b * k;
        const double mx = *std::max_element(z, z + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
        const double log_sum = std::log(sum);
        const auto label = static_cast<std::size_t>(labels[b]);
        r.loss += log_sum - (z[label] - mx);
        double* g = &r.grad_logits[b * k];
        for (std::size_t j = 0; j < k; ++j) {
            const double pj = std::exp(z[j] - mx) / sum;
            g[j] = (pj - (j == label ? 1.0 : 0.0)) / static_cast<double>(nb);
        }
    }
    r.loss /= static_cast<double>(nb);
    return r;
}

Tensor per_example_logit_gradients(const Tensor& logits, std::span<const int> labels) {
    check(logits, labels);
    Tensor g = softmax(logits);
    const std::size_t k = logits.dim(1);
    for (std::size_t b = 0; b < labels.size(); ++b) g[b * k + static_cast<std::size_t>(labels[b])] -= 1.0;
    return g;
}

double accuracy(const Tensor& logits, std::span<const int> labels) {
    check(logits, labels);
    const std::size_t nb = logits.dim(0), k = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        const double* z = logits.data().data() + b * k;
        const auto pred = static_cast<int>(std::max_element(z, z + k) - z);
        if (pred == labels[b]) ++correct;
    }
    return nb ? static_cast<double>(correct) / static_cast<double>(nb) : 0.0;
}

}  // namespace bnlab::nn
