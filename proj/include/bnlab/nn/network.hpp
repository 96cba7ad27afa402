#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bnlab/nn/layers.hpp"
#include "bnlab/nn/loss.hpp"

namespace bnlab::nn {

enum class NetKind { resnet, plain, dense };
enum class NormPlacement { per_layer, final_only, none };

NetKind parse_net_kind(std::string_view name);
std::string_view to_string(NetKind kind);
NormPlacement parse_norm_placement(std::string_view name);
std::string_view to_string(NormPlacement placement);

// Scaled-down CIFAR ResNet family plus plain conv and dense stacks.
//
// depth counts weight layers (convs and dense), classifier included:
//   resnet  stem conv, (depth-2)/2 two-conv residual blocks, pool, dense
//   plain   depth-1 convs, pool, dense
//   dense   depth-1 hidden dense layers, dense
// per_layer placement inserts a normalizer after every hidden weight layer
// (conv -> norm -> relu); final_only normalizes only the features entering the
// pooling/classifier stage.
//
// stream_relu applies a ReLU to the resnet's residual stream (after the stem
// and after every shortcut addition). Off, the stream is a plain running sum
// and each block body is conv -> norm -> relu -> conv -> norm.
struct NetworkConfig {
    NetKind kind = NetKind::resnet;
    std::size_t depth = 8;
    std::size_t width = 16;
    bool stream_relu = false;
    std::size_t class_count = 10;
    Shape input_shape{3, 8, 8};  // per example: channels, height, width
    NormPlacement normalization = NormPlacement::per_layer;
    Grouping grouping = Grouping::batch();
    BatchNormOptions bn;
    InitScheme init;

    void validate() const;
};

// One instrumented layer: a weight layer and the normalizer applied directly
// to its output, if any.
struct Tap {
    std::size_t index = 0;
    WeightLayer* weight = nullptr;
    NormLayer* norm = nullptr;
    // Set when this layer's output closes a residual block.
    const ResidualBlock* block = nullptr;

    // Output of the weight layer before normalization.
    const Tensor& pre_norm() const { return weight->last_output(); }
    // What the next ReLU sees: the residual sum, the normalized output, or
    // the raw output, in that order of precedence.
    const Tensor& pre_activation() const {
        if (block) return block->last_sum();
        return norm ? norm->last_output() : weight->last_output();
    }
};

struct LayerSnapshot {
    std::size_t index = 0;
    bool is_conv = false;
    Tensor input;
    Tensor pre_norm;
    Tensor pre_activation;
    Tensor upstream;  // dL/d(weight-layer output) from the latest backward
    Tensor weight;
    Tensor weight_grad;
};

struct NetworkSnapshot {
    std::vector<LayerSnapshot> layers;
};

class Network {
public:
    Network(NetworkConfig config, SeededRng& rng);

    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const NetworkConfig& config() const noexcept { return config_; }

    Tensor forward(const Tensor& x, Mode mode);
    // Backpropagates dL/dlogits through the latest forward; overwrites all
    // parameter gradients and returns dL/dinput.
    Tensor backward(const Tensor& grad_logits);

    double loss(const Tensor& x, std::span<const int> labels, Mode mode);
    // Forward + softmax cross-entropy + backward. Returns the batch loss.
    double compute_gradients(const Tensor& x, std::span<const int> labels, Mode mode);
    const Tensor& last_logits() const noexcept { return logits_; }

    std::vector<ParamRef> params();
    std::vector<Tensor> parameter_values();
    void set_parameter_values(const std::vector<Tensor>& values);
    std::vector<double> flat_gradient();
    std::size_t parameter_count();

    const std::vector<Tap>& taps() const noexcept { return taps_; }
    std::vector<NormLayer*> norm_layers();
    NetworkSnapshot snapshot() const;

    // Appends a layer; used by build and by tests assembling toy nets.
    void append(std::unique_ptr<Layer> layer);
    void add_tap(WeightLayer* weight, NormLayer* norm);

    // Empty network for hand assembly; config is informational only.
    static Network assemble(NetworkConfig config);

private:
    explicit Network(NetworkConfig config);

    NetworkConfig config_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<Tap> taps_;
    Tensor logits_;
};

Network build_network(const NetworkConfig& config, SeededRng& rng);

}  // namespace bnlab::nn
