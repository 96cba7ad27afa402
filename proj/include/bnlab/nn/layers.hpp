#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bnlab/init.hpp"
#include "bnlab/nn/batchnorm.hpp"
#include "bnlab/nn/generalized_norm.hpp"
#include "bnlab/rng.hpp"
#include "bnlab/tensor.hpp"

namespace bnlab::nn {

// train: batch statistics, running/cached state updated.
// probe: batch statistics, no state touched (instruments use this).
// eval:  running statistics.
enum class Mode { train, probe, eval };

// Mutable view of one parameter tensor and its gradient buffer.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool decay = false;  // weight decay applies to conv/dense weights only
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    // Consumes dL/d(output) of the latest forward; fills parameter gradients
    // (overwriting, not accumulating) and returns dL/d(input).
    virtual Tensor backward(const Tensor& upstream) = 0;
    virtual void collect_params(std::vector<ParamRef>& out) { (void)out; }
    // Appends this layer, then any children, in forward order.
    virtual void collect_layers(std::vector<Layer*>& out) { out.push_back(this); }
};

// Layers that own a weight matrix/kernel: the instrumented taps.
class WeightLayer : public Layer {
public:
    virtual bool is_conv() const = 0;
    virtual const Tensor& weight() const = 0;
    virtual const Tensor& weight_grad() const = 0;
    const Tensor& last_input() const { return input_; }
    const Tensor& last_output() const { return output_; }
    // dL/d(output) seen by the latest backward.
    const Tensor& last_upstream() const { return upstream_; }

protected:
    Tensor input_;
    Tensor output_;
    Tensor upstream_;
};

class Conv3x3Layer : public WeightLayer {
public:
    Conv3x3Layer(std::size_t c_in, std::size_t c_out, const InitScheme& init, SeededRng& rng);
    explicit Conv3x3Layer(Tensor kernel);

    std::string kind() const override { return "conv3x3"; }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    void collect_params(std::vector<ParamRef>& out) override;

    bool is_conv() const override { return true; }
    const Tensor& weight() const override { return kernel_; }
    const Tensor& weight_grad() const override { return grad_kernel_; }
    Tensor& kernel() { return kernel_; }

private:
    Tensor kernel_;
    Tensor grad_kernel_;
};

// y = x Wᵀ + b on inputs flattened to [b, in]. Output is [b, out].
class DenseLayer : public WeightLayer {
public:
    DenseLayer(std::size_t in, std::size_t out, const InitScheme& init, SeededRng& rng);
    DenseLayer(Tensor weight, Tensor bias);

    std::string kind() const override { return "dense"; }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    void collect_params(std::vector<ParamRef>& out) override;

    bool is_conv() const override { return false; }
    const Tensor& weight() const override { return weight_; }
    const Tensor& weight_grad() const override { return grad_weight_; }
    Tensor& weight_mut() { return weight_; }
    Tensor& bias() { return bias_; }

private:
    Tensor weight_;  // [out, in]
    Tensor bias_;    // [out]
    Tensor grad_weight_;
    Tensor grad_bias_;
    Shape input_shape_;
};

class ReluLayer : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;

private:
    Tensor input_;
};

// [b,c,h,w] -> [b,c] spatial mean.
class GlobalAvgPoolLayer : public Layer {
public:
    std::string kind() const override { return "avgpool"; }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;

private:
    Shape input_shape_;
};

// Batch norm (with toggles and statistics period) or one of the
// generalized groupings, behind one layer interface.
class NormLayer : public Layer {
public:
    NormLayer(std::size_t channels, Grouping grouping, BatchNormOptions options);

    std::string kind() const override;
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    void collect_params(std::vector<ParamRef>& out) override;

    bool is_batch_norm() const { return grouping_.kind == GroupingKind::batch; }
    BatchNormLayer& state() { return bn_; }
    const BatchNormLayer& state() const { return bn_; }
    const Tensor& last_input() const { return input_; }
    const Tensor& last_output() const { return output_; }

private:
    Grouping grouping_;
    BatchNormLayer bn_;  // gamma/beta live here for every grouping
    std::optional<BnCache> bn_cache_;
    std::optional<GeneralizedNormCache> gn_cache_;
    Tensor grad_gamma_;
    Tensor grad_beta_;
    Tensor input_;
    Tensor output_;
};

// out = shortcut(x) + body(x), optionally followed by a ReLU. The shortcut is
// the identity, with zero-padded channels when body widens the input.
class ResidualBlock : public Layer {
public:
    explicit ResidualBlock(std::vector<std::unique_ptr<Layer>> body, bool relu_after_add = true);

    std::string kind() const override { return "residual"; }
    Tensor forward(const Tensor& x, Mode mode) override;
    Tensor backward(const Tensor& upstream) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void collect_layers(std::vector<Layer*>& out) override;

    // shortcut + body, as seen by the closing ReLU.
    const Tensor& last_sum() const { return sum_; }

private:
    std::vector<std::unique_ptr<Layer>> body_;
    bool relu_after_add_;
    Tensor sum_;
    Shape input_shape_;
};

}  // namespace bnlab::nn
