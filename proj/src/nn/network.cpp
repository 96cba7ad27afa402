#include "bnlab/nn/network.hpp"

#include <string>

#include "bnlab/error.hpp"

namespace bnlab::nn {

NetKind parse_net_kind(std::string_view name) {
    if (name == "resnet") return NetKind::resnet;
    if (name == "plain") return NetKind::plain;
    if (name == "dense") return NetKind::dense;
    throw ValueError("unknown network kind '" + std::string(name) + "'");
}

std::string_view to_string(NetKind kind) {
    switch (kind) {
        case NetKind::resnet: return "resnet";
        case NetKind::plain: return "plain";
        case NetKind::dense: return "dense";
    }
    return "?";
}

NormPlacement parse_norm_placement(std::string_view name) {
    if (name == "per_layer") return NormPlacement::per_layer;
    if (name == "final_only") return NormPlacement::final_only;
    if (name == "none") return NormPlacement::none;
    throw ValueError("unknown normalization placement '" + std::string(name) + "'");
}

std::string_view to_string(NormPlacement placement) {
    switch (placement) {
        case NormPlacement::per_layer: return "per_layer";
        case NormPlacement::final_only: return "final_only";
        case NormPlacement::none: return "none";
    }
    return "?";
}

void NetworkConfig::validate() const {
    if (depth == 0) throw ConfigError("network depth must be positive");
    if (kind == NetKind::resnet && (depth < 2 || (depth - 2) % 2 != 0))
        throw ConfigError("resnet depth must be 2 + 2k (stem, k two-conv blocks, classifier), got " +
                          std::to_string(depth));
    if (width == 0) throw ConfigError("network width must be positive");
    if (class_count == 0) throw ConfigError("class_count must be positive");
    if (input_shape.size() != 3) throw ConfigError("input shape must be (channels, height, width)");
    for (auto d : input_shape)
        if (d == 0) throw ConfigError("input dimensions must be positive");
    if (normalization != NormPlacement::none && grouping.kind == GroupingKind::group &&
        (grouping.groups == 0 || width % grouping.groups != 0))
        throw GroupingError("group count " + std::to_string(grouping.groups) + " does not divide width " +
                            std::to_string(width));
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {}

Network Network::assemble(NetworkConfig config) { return Network(std::move(config)); }

void Network::append(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

void Network::add_tap(WeightLayer* weight, NormLayer* norm) { taps_.push_back({taps_.size(), weight, norm, nullptr}); }

namespace {

class Builder {
public:
    Builder(const NetworkConfig& cfg, SeededRng& rng) : cfg_(cfg), rng_(rng) {}

    // weight layer (+ norm if per-layer) (+ relu); records the tap.
    template <class Sink>
    void hidden_unit(Sink& sink, std::unique_ptr<WeightLayer> weight, std::size_t out_channels, bool relu,
                     std::vector<Tap>& taps) {
        unit(sink, std::move(weight), out_channels, relu, cfg_.normalization == NormPlacement::per_layer, taps);
    }

    template <class Sink>
    void classifier(Sink& sink, std::unique_ptr<WeightLayer> weight, std::vector<Tap>& taps) {
        unit(sink, std::move(weight), 0, false, false, taps);
    }

    std::unique_ptr<WeightLayer> conv(std::size_t in, std::size_t out) {
        return std::make_unique<Conv3x3Layer>(in, out, cfg_.init, rng_);
    }
    std::unique_ptr<WeightLayer> dense(std::size_t in, std::size_t out) {
        return std::make_unique<DenseLayer>(in, out, cfg_.init, rng_);
    }
    std::unique_ptr<Layer> final_norm(std::size_t channels) {
        return std::make_unique<NormLayer>(channels, cfg_.grouping, cfg_.bn);
    }

private:
    template <class Sink>
    void unit(Sink& sink, std::unique_ptr<WeightLayer> weight, std::size_t out_channels, bool relu, bool normalize,
              std::vector<Tap>& taps) {
        WeightLayer* w = weight.get();
        sink.push_back(std::move(weight));
        NormLayer* norm = nullptr;
        if (normalize) {
            auto n = std::make_unique<NormLayer>(out_channels, cfg_.grouping, cfg_.bn);
            norm = n.get();
            sink.push_back(std::move(n));
        }
        if (relu) sink.push_back(std::make_unique<ReluLayer>());
        taps.push_back({taps.size(), w, norm, nullptr});
    }

    const NetworkConfig& cfg_;
    SeededRng& rng_;
};

}  // namespace

Network::Network(NetworkConfig config, SeededRng& rng) : config_(std::move(config)) {
    config_.validate();
    const auto& cfg = config_;
    Builder build(cfg, rng);
    const std::size_t in_c = cfg.input_shape[0];
    const bool final_only = cfg.normalization == NormPlacement::final_only;

    switch (cfg.kind) {
        case NetKind::resnet: {
            build.hidden_unit(layers_, build.conv(in_c, cfg.width), cfg.width, cfg.stream_relu, taps_);
            const std::size_t blocks = (cfg.depth - 2) / 2;
            for (std::size_t k = 0; k < blocks; ++k) {
                std::vector<std::unique_ptr<Layer>> body;
                build.hidden_unit(body, build.conv(cfg.width, cfg.width), cfg.width, true, taps_);
                build.hidden_unit(body, build.conv(cfg.width, cfg.width), cfg.width, false, taps_);
                auto block = std::make_unique<ResidualBlock>(std::move(body), cfg.stream_relu);
                taps_.back().block = block.get();
                layers_.push_back(std::move(block));
            }
            if (final_only) layers_.push_back(build.final_norm(cfg.width));
            layers_.push_back(std::make_unique<GlobalAvgPoolLayer>());
            build.classifier(layers_, build.dense(cfg.width, cfg.class_count), taps_);
            break;
        }
        case NetKind::plain: {
            std::size_t channels = in_c;
            for (std::size_t k = 0; k + 1 < cfg.depth; ++k) {
                build.hidden_unit(layers_, build.conv(channels, cfg.width), cfg.width, true, taps_);
                channels = cfg.width;
            }
            if (final_only) layers_.push_back(build.final_norm(channels));
            layers_.push_back(std::make_unique<GlobalAvgPoolLayer>());
            build.classifier(layers_, build.dense(channels, cfg.class_count), taps_);
            break;
        }
        case NetKind::dense: {
            std::size_t features = shape_size(cfg.input_shape);
            for (std::size_t k = 0; k + 1 < cfg.depth; ++k) {
                build.hidden_unit(layers_, build.dense(features, cfg.width), cfg.width, true, taps_);
                features = cfg.width;
            }
            if (final_only) layers_.push_back(build.final_norm(features));
            build.classifier(layers_, build.dense(features, cfg.class_count), taps_);
            break;
        }
    }
}

Network build_network(const NetworkConfig& config, SeededRng& rng) { return Network(config, rng); }

Tensor Network::forward(const Tensor& x, Mode mode) {
    const auto& in = config_.input_shape;
    if (x.rank() != 4 || x.dim(1) != in[0] || x.dim(2) != in[1] || x.dim(3) != in[2])
        throw DimensionError("network input must be [b, " + std::to_string(in[0]) + ", " + std::to_string(in[1]) +
                             ", " + std::to_string(in[2]) + "], got " + shape_string(x.shape()));
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, mode);
    logits_ = h;
    return h;
}

Tensor Network::backward(const Tensor& grad_logits) {
    if (grad_logits.shape() != logits_.shape())
        throw DimensionError("logit gradient shape " + shape_string(grad_logits.shape()) +
                             " does not match the latest forward " + shape_string(logits_.shape()));
    Tensor g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

double Network::loss(const Tensor& x, std::span<const int> labels, Mode mode) {
    return softmax_xent(forward(x, mode), labels).loss;
}

double Network::compute_gradients(const Tensor& x, std::span<const int> labels, Mode mode) {
    SoftmaxXent r = softmax_xent(forward(x, mode), labels);
    backward(r.grad_logits);
    return r.loss;
}

std::vector<ParamRef> Network::params() {
    std::vector<ParamRef> out;
    for (auto& layer : layers_) layer->collect_params(out);
    return out;
}

std::vector<Tensor> Network::parameter_values() {
    std::vector<Tensor> out;
    for (const auto& p : params()) out.push_back(*p.value);
    return out;
}

void Network::set_parameter_values(const std::vector<Tensor>& values) {
    auto refs = params();
    if (refs.size() != values.size()) throw DimensionError("parameter count mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].value->shape() != values[i].shape())
            throw DimensionError("parameter shape mismatch for " + refs[i].name);
        *refs[i].value = values[i];
    }
}

std::vector<double> Network::flat_gradient() {
    std::vector<double> out;
    for (const auto& p : params()) out.insert(out.end(), p.grad->data().begin(), p.grad->data().end());
    return out;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += p.value->size();
    return n;
}

std::vector<NormLayer*> Network::norm_layers() {
    std::vector<Layer*> all;
    for (auto& layer : layers_) layer->collect_layers(all);
    std::vector<NormLayer*> out;
    for (Layer* l : all)
        if (auto* n = dynamic_cast<NormLayer*>(l)) out.push_back(n);
    return out;
}

NetworkSnapshot Network::snapshot() const {
    NetworkSnapshot s;
    for (const auto& tap : taps_) {
        LayerSnapshot ls;
        ls.index = tap.index;
        ls.is_conv = tap.weight->is_conv();
        ls.input = tap.weight->last_input();
        ls.pre_norm = tap.pre_norm();
        ls.pre_activation = tap.pre_activation();
        ls.upstream = tap.weight->last_upstream();
        ls.weight = tap.weight->weight();
        ls.weight_grad = tap.weight->weight_grad();
        s.layers.push_back(std::move(ls));
    }
    return s;
}

}  // namespace bnlab::nn
