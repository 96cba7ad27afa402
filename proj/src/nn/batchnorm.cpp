#include "bnlab/nn/batchnorm.hpp"

#include <cmath>
#include <string>

#include "bnlab/error.hpp"

namespace bnlab::nn {

BatchNormLayer::BatchNormLayer(std::size_t channels, BatchNormOptions opts)
    : gamma({channels}, 1.0),
      beta({channels}, 0.0),
      running_mean(channels, 0.0),
      running_var(channels, 1.0),
      cached_mean(channels, 0.0),
      cached_var(channels, 1.0),
      options(opts) {
    if (options.eps <= 0.0) throw ValueError("batch norm eps must be positive");
    if (options.stat_update_period == 0) throw ValueError("stat_update_period must be positive");
}

void BatchNormLayer::set_running_stats(std::vector<double> mean, std::vector<double> var) {
    if (mean.size() != channels() || var.size() != channels())
        throw DimensionError("running statistics must have one entry per channel");
    for (double v : var)
        if (!(v >= 0.0)) throw ValueError("running variance must be non-negative");
    running_mean = std::move(mean);
    running_var = std::move(var);
    running_initialized = true;
}

ChannelStats channel_statistics(const Tensor& activations) {
    const auto lay = channel_layout(activations);
    if (lay.batch * lay.spatial == 0) throw DimensionError("channel statistics of an empty tensor");
    const double n = static_cast<double>(lay.batch * lay.spatial);
    ChannelStats st{std::vector<double>(lay.channels, 0.0), std::vector<double>(lay.channels, 0.0)};
    const double* x = activations.data().data();
    for (std::size_t c = 0; c < lay.channels; ++c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < lay.batch; ++b) {
            const double* p = x + (b * lay.channels + c) * lay.spatial;
            for (std::size_t s = 0; s < lay.spatial; ++s) sum += p[s];
        }
        const double mean = sum / n;
        double sq = 0.0;
        for (std::size_t b = 0; b < lay.batch; ++b) {
            const double* p = x + (b * lay.channels + c) * lay.spatial;
            for (std::size_t s = 0; s < lay.spatial; ++s) {
                const double d = p[s] - mean;
                sq += d * d;
            }
        }
        st.mean[c] = mean;
        st.var[c] = sq / n;
    }
    return st;
}

namespace {

void check_input(const Tensor& input, const BatchNormLayer& layer) {
    const auto lay = channel_layout(input);
    if (lay.channels != layer.channels())
        throw DimensionError("batch norm expects " + std::to_string(layer.channels()) + " channels, got " +
                             shape_string(input.shape()));
}

void check_batch(const Tensor& input) {
    const auto lay = channel_layout(input);
    if (lay.batch * lay.spatial < 2)
        throw DegenerateBatchError("batch normalization needs at least 2 activations per channel, got " +
                                   shape_string(input.shape()));
}

// Shared normalization so train, probe, eval, and the generalized normalizer
// produce identical bits for identical statistics.
void normalize_channels(const Tensor& input, const BatchNormLayer& layer, const std::vector<double>& mean,
                        const std::vector<double>& inv_std, Tensor& xhat, Tensor& out) {
    const auto lay = channel_layout(input);
    const auto& t = layer.options.toggles;
    const double* x = input.data().data();
    double* xh = xhat.data().data();
    double* y = out.data().data();
    for (std::size_t b = 0; b < lay.batch; ++b)
        for (std::size_t c = 0; c < lay.channels; ++c) {
            const std::size_t base = (b * lay.channels + c) * lay.spatial;
            const double m = mean[c];
            const double is = inv_std[c];
            const double g = layer.gamma[c];
            const double bb = layer.beta[c];
            for (std::size_t s = 0; s < lay.spatial; ++s) {
                double v = x[base + s];
                if (t.use_mean) v = v - m;
                if (t.use_var) v = v * is;
                xh[base + s] = v;
                if (t.use_gamma) v = g * v;
                if (t.use_beta) v = v + bb;
                y[base + s] = v;
            }
        }
}

std::vector<double> inverse_std(const std::vector<double>& var, double eps) {
    std::vector<double> is(var.size());
    for (std::size_t c = 0; c < var.size(); ++c) is[c] = 1.0 / std::sqrt(var[c] + eps);
    return is;
}

}  // namespace

BnForward bn_forward_with_stats(const Tensor& input, const BatchNormLayer& layer, const ChannelStats& stats,
                                bool stats_from_batch) {
    check_input(input, layer);
    BnForward f{Tensor(input.shape()), {}};
    f.cache.generation = layer.generation;
    f.cache.input = input;
    f.cache.xhat = Tensor(input.shape());
    f.cache.mean = stats.mean;
    f.cache.var = stats.var;
    f.cache.inv_std = inverse_std(stats.var, layer.options.eps);
    f.cache.stats_from_batch = stats_from_batch;
    normalize_channels(input, layer, f.cache.mean, f.cache.inv_std, f.cache.xhat, f.output);
    return f;
}

BnForward bn_forward_train(const Tensor& input, BatchNormLayer& layer) {
    check_input(input, layer);
    check_batch(input);
    const bool refresh =
        !layer.cached_initialized || layer.batch_counter % layer.options.stat_update_period == 0;
    ChannelStats stats;
    if (refresh) {
        stats = channel_statistics(input);
        layer.cached_mean = stats.mean;
        layer.cached_var = stats.var;
        layer.cached_initialized = true;

        const double rho = layer.options.momentum;
        const auto& t = layer.options.toggles;
        const bool track_mean = t.use_mean || layer.options.track_disabled;
        const bool track_var = t.use_var || layer.options.track_disabled;
        for (std::size_t c = 0; c < layer.channels(); ++c) {
            if (track_mean) layer.running_mean[c] = rho * layer.running_mean[c] + (1.0 - rho) * stats.mean[c];
            if (track_var) layer.running_var[c] = rho * layer.running_var[c] + (1.0 - rho) * stats.var[c];
        }
        layer.running_initialized = true;
    } else {
        stats = ChannelStats{layer.cached_mean, layer.cached_var};
    }
    ++layer.batch_counter;
    ++layer.generation;
    return bn_forward_with_stats(input, layer, stats, refresh);
}

BnForward bn_forward_probe(const Tensor& input, const BatchNormLayer& layer) {
    check_input(input, layer);
    check_batch(input);
    return bn_forward_with_stats(input, layer, channel_statistics(input), true);
}

Tensor bn_forward_eval(const Tensor& input, const BatchNormLayer& layer) {
    check_input(input, layer);
    if (!layer.running_initialized)
        throw UninitializedStatsError("batch norm running statistics were never initialized");
    Tensor xhat(input.shape());
    Tensor out(input.shape());
    normalize_channels(input, layer, layer.running_mean, inverse_std(layer.running_var, layer.options.eps), xhat,
                       out);
    return out;
}

BnGrads bn_backward(const Tensor& upstream, const BnCache& cache, const BatchNormLayer& layer) {
    if (cache.generation != layer.generation)
        throw CacheMismatchError("batch norm cache is from an earlier forward pass");
    if (upstream.shape() != cache.input.shape())
        throw CacheMismatchError("upstream gradient shape " + shape_string(upstream.shape()) +
                                 " does not match the cached forward input " + shape_string(cache.input.shape()));

    const auto lay = channel_layout(upstream);
    const auto& t = layer.options.toggles;
    const double n = static_cast<double>(lay.batch * lay.spatial);
    BnGrads g{Tensor(upstream.shape()), Tensor({lay.channels}), Tensor({lay.channels})};
    const double* dy = upstream.data().data();
    const double* x = cache.input.data().data();
    const double* xh = cache.xhat.data().data();
    double* dx = g.grad_input.data().data();

    for (std::size_t c = 0; c < lay.channels; ++c) {
        const double gam = t.use_gamma ? layer.gamma[c] : 1.0;
        const double s = t.use_var ? cache.inv_std[c] : 1.0;
        const double mu = cache.mean[c];
        const double shift = t.use_mean ? mu : 0.0;

        double sum_dy = 0.0, sum_dy_xhat = 0.0, sum_dxhat = 0.0, sum_dxhat_centered = 0.0;
        for (std::size_t b = 0; b < lay.batch; ++b) {
            const std::size_t base = (b * lay.channels + c) * lay.spatial;
            for (std::size_t k = 0; k < lay.spatial; ++k) {
                const double d = dy[base + k];
                const double dxh = d * gam;
                sum_dy += d;
                sum_dy_xhat += d * xh[base + k];
                sum_dxhat += dxh;
                sum_dxhat_centered += dxh * (x[base + k] - shift);
            }
        }
        if (t.use_gamma) g.grad_gamma[c] = sum_dy_xhat;
        if (t.use_beta) g.grad_beta[c] = sum_dy;

        const bool through_stats = cache.stats_from_batch;
        const double mean_dxhat = (through_stats && t.use_mean) ? sum_dxhat / n : 0.0;
        // d/dx_i of var: 2 (x_i - mu) / n; ds/dvar = -s^3 / 2.
        const double var_coef = (through_stats && t.use_var) ? s * s * s * sum_dxhat_centered / n : 0.0;
        for (std::size_t b = 0; b < lay.batch; ++b) {
            const std::size_t base = (b * lay.channels + c) * lay.spatial;
            for (std::size_t k = 0; k < lay.spatial; ++k) {
                const double dxh = dy[base + k] * gam;
                dx[base + k] = s * (dxh - mean_dxhat) - var_coef * (x[base + k] - mu);
            }
        }
    }
    return g;
}

}  // namespace bnlab::nn
