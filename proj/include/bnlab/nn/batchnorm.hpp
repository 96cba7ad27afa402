#pragma once

#include <cstdint>
#include <vector>

#include "bnlab/tensor.hpp"

namespace bnlab::nn {

// Which factors of y = gamma * (x - mean) / sqrt(var + eps) + beta are applied.
struct BnToggles {
    bool use_mean = true;
    bool use_var = true;
    bool use_gamma = true;
    bool use_beta = true;

    bool all_off() const noexcept { return !use_mean && !use_var && !use_gamma && !use_beta; }
};

struct BatchNormOptions {
    double eps = 1e-5;
    double momentum = 0.9;  // running <- momentum * running + (1 - momentum) * batch
    BnToggles toggles;
    std::size_t stat_update_period = 1;  // 1: every batch, 2: every other batch
    // Whether running statistics keep tracking a component whose toggle is off.
    bool track_disabled = true;
};

// Per-channel batch normalization state. Works on [b,c] and [b,c,h,w]
// activations; statistics pool over batch and spatial positions.
struct BatchNormLayer {
    explicit BatchNormLayer(std::size_t channels, BatchNormOptions options = {});

    std::size_t channels() const noexcept { return gamma.size(); }
    void set_running_stats(std::vector<double> mean, std::vector<double> var);

    Tensor gamma;  // [c], starts at 1
    Tensor beta;   // [c], starts at 0
    std::vector<double> running_mean;
    std::vector<double> running_var;
    std::vector<double> cached_mean;
    std::vector<double> cached_var;
    BatchNormOptions options;
    std::size_t batch_counter = 0;
    bool running_initialized = false;
    bool cached_initialized = false;
    // Bumped by every training forward; caches from older passes are stale.
    std::uint64_t generation = 0;
};

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> var;  // population variance
};

// Mean and population variance per channel over (b, spatial), two-pass,
// visiting elements batch-major then spatially.
ChannelStats channel_statistics(const Tensor& activations);

struct BnCache {
    std::uint64_t generation = 0;
    Tensor input;
    Tensor xhat;  // normalized activations before gamma/beta
    std::vector<double> mean;
    std::vector<double> var;
    std::vector<double> inv_std;
    bool stats_from_batch = true;  // false when stale cached statistics were used
};

struct BnForward {
    Tensor output;
    BnCache cache;
};

struct BnGrads {
    Tensor grad_input;
    Tensor grad_gamma;
    Tensor grad_beta;
};

// Training-mode forward. Refreshes the cached statistics when
// batch_counter % stat_update_period == 0, otherwise normalizes with the stale
// ones; updates running averages on refresh batches.
BnForward bn_forward_train(const Tensor& input, BatchNormLayer& layer);

// Batch statistics like training mode, but leaves every piece of layer state
// untouched. Used by instruments that must not perturb training.
BnForward bn_forward_probe(const Tensor& input, const BatchNormLayer& layer);

BnForward bn_forward_with_stats(const Tensor& input, const BatchNormLayer& layer, const ChannelStats& stats,
                                bool stats_from_batch);

// Evaluation-mode forward using the running statistics.
Tensor bn_forward_eval(const Tensor& input, const BatchNormLayer& layer);

BnGrads bn_backward(const Tensor& upstream, const BnCache& cache, const BatchNormLayer& layer);

}  // namespace bnlab::nn
