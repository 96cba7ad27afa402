#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bnlab/nn/network.hpp"
#include "bnlab/tensor.hpp"

namespace bnlab::diag {

// ---- moments ----------------------------------------------------------------

struct ChannelMoments {
    std::vector<double> mean;
    std::vector<double> var;  // population variance
};

// Per-channel mean and variance over (b, x, y) of a [b,c] or [b,c,h,w] tensor.
ChannelMoments channel_moments(const Tensor& acts);

struct LayerMoments {
    std::size_t layer = 0;
    bool is_conv = false;
    ChannelMoments moments;

    double mean_variance() const;
    double mean_abs_mean() const;
};

struct MomentProfile {
    std::vector<LayerMoments> layers;
};

// Moments of every tap of the latest forward pass, in depth order. Normalized
// layers are read before their normalizer, the rest where the next ReLU
// would act.
MomentProfile moment_profile(const nn::Network& net);

// Probe-mode forward on the batch, then moment_profile.
MomentProfile depth_moment_profile(nn::Network& net, const Tensor& batch);

// ---- loss probes ------------------------------------------------------------

// Anything with parameters, a loss and a gradient at the current point.
class Objective {
public:
    virtual ~Objective() = default;
    virtual std::vector<nn::ParamRef> params() = 0;
    virtual double loss() = 0;
    // Loss at the current point; leaves the gradient in every ParamRef::grad.
    virtual double loss_and_gradient() = 0;
};

// Network loss on one fixed batch, evaluated with batch statistics and no
// state updates.
class NetworkObjective : public Objective {
public:
    NetworkObjective(nn::Network& net, const Tensor& x, std::span<const int> labels);

    std::vector<nn::ParamRef> params() override { return net_.params(); }
    double loss() override;
    double loss_and_gradient() override;

private:
    nn::Network& net_;
    const Tensor& x_;
    std::span<const int> labels_;
};

// l(x) = 0.5 * |x|^2
class QuadraticObjective : public Objective {
public:
    explicit QuadraticObjective(Tensor x0);

    std::vector<nn::ParamRef> params() override;
    double loss() override;
    double loss_and_gradient() override;
    const Tensor& point() const { return x_; }

private:
    Tensor x_;
    Tensor grad_;
};

struct LossProbeCurve {
    std::vector<double> alphas;
    std::vector<double> relative_losses;
    std::vector<bool> non_finite;
};

// 0 followed by 25 log-spaced points from 1e-5 to 10.
std::vector<double> default_probe_alphas();

// loss(p - alpha * grad) / loss(p) on the objective's fixed data. Parameters
// and gradient buffers are restored bit-exactly before returning.
LossProbeCurve loss_step_probe(Objective& objective, std::span<const double> alphas);

LossProbeCurve loss_step_probe(nn::Network& net, const Tensor& x, std::span<const int> labels,
                               std::span<const double> alphas);

// ---- divergence -------------------------------------------------------------

struct DivergenceOptions {
    double threshold = 1e3;
    std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
};

struct FractionSnapshot {
    double fraction = 0.0;
    double loss = 0.0;
    MomentProfile profile;
};

struct DivergenceEvent {
    std::size_t step = 0;
    double pre_loss = 0.0;
    double post_loss = 0.0;
    std::vector<FractionSnapshot> snapshots;
};

// True when loss exceeds the threshold or is not finite.
bool is_divergent(double loss, double threshold);

// Training-loop hook. Feed every step the parameters from before the update,
// the loss before the update and the loss on the same batch after it.
class DivergenceCapture {
public:
    explicit DivergenceCapture(DivergenceOptions options = {});

    const DivergenceOptions& options() const noexcept { return options_; }
    const std::optional<DivergenceEvent>& event() const noexcept { return event_; }

    // Fires at most once. On firing, replays the update scaled by each
    // fraction from the saved state, records the loss and moment profile on
    // the batch, and leaves the network at the post-update parameters.
    const std::optional<DivergenceEvent>& observe(nn::Network& net, const std::vector<Tensor>& before,
                                                  const Tensor& x, std::span<const int> labels, std::size_t step,
                                                  double pre_loss, double post_loss);

private:
    DivergenceOptions options_;
    std::optional<DivergenceEvent> event_;
};

// ---- gradient statistics ----------------------------------------------------

struct HistogramStats {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    std::optional<double> excess_kurtosis;  // empty when the variance is below 1e-30
    std::optional<double> tail_ratio;       // p99.9 of |g| over the median |g|; empty if the median is 0
    double max_abs = 0.0;
};

HistogramStats gradient_histogram_stats(std::span<const double> values);

inline constexpr double kRatioCeiling = 1e12;

struct CoherenceRow {
    std::size_t layer = 0;
    double a = 0.0;           // sum |d|
    double b_abs = 0.0;       // |sum d|
    double partial_b = 0.0;   // sum_b |sum_xy d|
    double partial_xy = 0.0;  // sum_xy |sum_b d|
    double ratio = 0.0;       // a / b_abs, capped at kRatioCeiling
    bool saturated = false;
};

// Row from the summands d[b,o,i,x',y',x,y] = upstream[b,o,x,y] * input[b,i,x+x',y+y']
// of one conv layer, each statistic averaged over the kernel parameters.
// The summands are generated on the fly.
CoherenceRow coherence_row(std::size_t layer, const Tensor& input, const Tensor& upstream);

// Same, from a materialized [c_out, c_in, 3, 3, b, h, w] summand tensor.
CoherenceRow coherence_row_from_summands(std::size_t layer, const Tensor& summands);

// Probe-mode forward/backward on the batch, one row per conv tap.
std::vector<CoherenceRow> sign_coherence(nn::Network& net, const Tensor& x, std::span<const int> labels);

// M[i, o] = sum over kernel offsets of |grad_kernel[o, i, x', y']|.
Tensor channel_grad_matrix(const Tensor& grad_kernel);

struct ClassGradHeatmap {
    Tensor grads;  // [b, K], dL_b / dlogit_{b,j}
    std::size_t modal_column = 0;
    // Share of rows whose largest positive entry sits in modal_column.
    double dominant_fraction = 0.0;
};

ClassGradHeatmap class_grad_heatmap(const Tensor& logits, std::span<const int> labels);
ClassGradHeatmap class_grad_heatmap(nn::Network& net, const Tensor& x, std::span<const int> labels);

// Backpropagates the batch-loss logit gradient with every class column not in
// class_mask zeroed; returns the resulting parameter gradients in params()
// order. Runs one probe-mode forward.
std::vector<Tensor> masked_gradients(nn::Network& net, const Tensor& x, std::span<const int> labels,
                                     std::span<const bool> class_mask);

struct ClasswiseNorms {
    std::size_t cls = 0;
    std::vector<std::string> names;  // "<index>.<param name>"
    std::vector<double> norms;
};

ClasswiseNorms classwise_gradient_mask(nn::Network& net, const Tensor& x, std::span<const int> labels,
                                       std::size_t cls);
std::vector<ClasswiseNorms> classwise_gradient_masks(nn::Network& net, const Tensor& x,
                                                     std::span<const int> labels);

struct MeanGradPair {
    std::size_t layer = 0;
    std::size_t in_channel = 0;
    std::size_t out_channel = 0;
    double activation_mean = 0.0;  // mean of the conv's input channel
    double mean_abs_grad = 0.0;    // mean |dL/dK[o,i,.,.]| over the 3x3 offsets
};

// One pair per (conv layer, in-channel, out-channel), gradients averaged
// over the sample.
std::vector<MeanGradPair> mean_vs_grad_pairs(nn::Network& net, const Tensor& x, std::span<const int> labels);

struct ChannelGradient {
    std::size_t layer = 0;
    std::size_t channel = 0;
    double value = 0.0;  // |sum over (b,x,y) of dL/d(output)|
};

// Bias-equivalent gradient per channel of one upstream tensor.
std::vector<double> channel_gradient_magnitudes(const Tensor& upstream);
std::vector<ChannelGradient> channel_gradients(nn::Network& net, const Tensor& x, std::span<const int> labels);

}  // namespace bnlab::diag
