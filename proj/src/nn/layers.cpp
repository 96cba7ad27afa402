#include "bnlab/nn/layers.hpp"

#include <cmath>

#include "bnlab/error.hpp"
#include "bnlab/kernels.hpp"

namespace bnlab::nn {

// ---- Conv3x3Layer -----------------------------------------------------------

Conv3x3Layer::Conv3x3Layer(std::size_t c_in, std::size_t c_out, const InitScheme& init, SeededRng& rng)
    : Conv3x3Layer(init_tensor({c_out, c_in, 3, 3}, init, rng)) {}

Conv3x3Layer::Conv3x3Layer(Tensor kernel) : kernel_(std::move(kernel)), grad_kernel_(kernel_.shape()) {
    if (kernel_.rank() != 4 || kernel_.dim(2) != 3 || kernel_.dim(3) != 3)
        throw DimensionError("conv kernel must be [c_out, c_in, 3, 3], got " + shape_string(kernel_.shape()));
}

Tensor Conv3x3Layer::forward(const Tensor& x, Mode) {
    input_ = x;
    output_ = kernels::conv2d_forward(x, kernel_);
    return output_;
}

Tensor Conv3x3Layer::backward(const Tensor& upstream) {
    upstream_ = upstream;
    ConvGrads g = kernels::conv2d_backward(upstream, input_, kernel_);
    grad_kernel_ = std::move(g.grad_kernel);
    return std::move(g.grad_input);
}

void Conv3x3Layer::collect_params(std::vector<ParamRef>& out) {
    out.push_back({"conv.kernel", &kernel_, &grad_kernel_, true});
}

// ---- DenseLayer -------------------------------------------------------------

DenseLayer::DenseLayer(std::size_t in, std::size_t out, const InitScheme& init, SeededRng& rng)
    : DenseLayer(init_tensor({out, in}, init, rng), Tensor({out}, 0.0)) {}

DenseLayer::DenseLayer(Tensor weight, Tensor bias)
    : weight_(std::move(weight)), bias_(std::move(bias)), grad_weight_(weight_.shape()), grad_bias_(bias_.shape()) {
    if (weight_.rank() != 2 || bias_.rank() != 1 || bias_.dim(0) != weight_.dim(0))
        throw DimensionError("dense layer expects weight [out, in] and bias [out]");
}

Tensor DenseLayer::forward(const Tensor& x, Mode) {
    if (x.rank() < 2) throw DimensionError("dense layer input must be batched, got " + shape_string(x.shape()));
    input_shape_ = x.shape();
    const std::size_t nb = x.dim(0);
    const std::size_t in = x.size() / nb;
    if (in != weight_.dim(1))
        throw DimensionError("dense layer expects " + std::to_string(weight_.dim(1)) + " inputs, got " +
                             shape_string(x.shape()));
    input_ = x.reshaped({nb, in});
    output_ = kernels::matmul_a_bt(input_, weight_);
    const std::size_t out = weight_.dim(0);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = 0; j < out; ++j) output_[b * out + j] += bias_[j];
    return output_;
}

Tensor DenseLayer::backward(const Tensor& upstream) {
    if (upstream.shape() != output_.shape())
        throw DimensionError("dense backward: upstream shape " + shape_string(upstream.shape()) +
                             " does not match output " + shape_string(output_.shape()));
    upstream_ = upstream;
    grad_weight_ = kernels::matmul_at_b(upstream, input_);
    const std::size_t nb = upstream.dim(0), out = upstream.dim(1);
    grad_bias_.fill(0.0);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = 0; j < out; ++j) grad_bias_[j] += upstream[b * out + j];
    return kernels::matmul(upstream, weight_).reshaped(input_shape_);
}

void DenseLayer::collect_params(std::vector<ParamRef>& out) {
    out.push_back({"dense.weight", &weight_, &grad_weight_, true});
    out.push_back({"dense.bias", &bias_, &grad_bias_, false});
}

// ---- ReluLayer --------------------------------------------------------------

Tensor ReluLayer::forward(const Tensor& x, Mode) {
    input_ = x;
    Tensor y = x;
    for (auto& v : y.storage())
        if (!(v > 0.0) && !std::isnan(v)) v = 0.0;
    return y;
}

Tensor ReluLayer::backward(const Tensor& upstream) {
    if (upstream.shape() != input_.shape()) throw DimensionError("relu backward shape mismatch");
    Tensor g = upstream;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(input_[i] > 0.0)) g[i] = 0.0;
    return g;
}

// ---- GlobalAvgPoolLayer -----------------------------------------------------

Tensor GlobalAvgPoolLayer::forward(const Tensor& x, Mode) {
    if (x.rank() != 4) throw DimensionError("avgpool expects [b,c,h,w], got " + shape_string(x.shape()));
    input_shape_ = x.shape();
    const std::size_t nb = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor y({nb, c});
    for (std::size_t i = 0; i < nb * c; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < plane; ++k) s += x[i * plane + k];
        y[i] = s / static_cast<double>(plane);
    }
    return y;
}

Tensor GlobalAvgPoolLayer::backward(const Tensor& upstream) {
    const std::size_t nb = input_shape_[0], c = input_shape_[1], plane = input_shape_[2] * input_shape_[3];
    if (upstream.shape() != Shape{nb, c}) throw DimensionError("avgpool backward shape mismatch");
    Tensor g(input_shape_);
    for (std::size_t i = 0; i < nb * c; ++i) {
        const double v = upstream[i] / static_cast<double>(plane);
        for (std::size_t k = 0; k < plane; ++k) g[i * plane + k] = v;
    }
    return g;
}

// ---- NormLayer --------------------------------------------------------------

NormLayer::NormLayer(std::size_t channels, Grouping grouping, BatchNormOptions options)
    : grouping_(grouping), bn_(channels, options), grad_gamma_({channels}), grad_beta_({channels}) {
    if (grouping_.kind == GroupingKind::group && (grouping_.groups == 0 || channels % grouping_.groups != 0))
        throw GroupingError("group count " + std::to_string(grouping_.groups) + " does not divide " +
                            std::to_string(channels) + " channels");
}

std::string NormLayer::kind() const { return std::string("norm.") + std::string(to_string(grouping_.kind)); }

Tensor NormLayer::forward(const Tensor& x, Mode mode) {
    input_ = x;
    bn_cache_.reset();
    gn_cache_.reset();
    if (is_batch_norm()) {
        if (mode == Mode::eval) {
            output_ = bn_forward_eval(x, bn_);
            return output_;
        }
        BnForward f = (mode == Mode::train) ? bn_forward_train(x, bn_) : bn_forward_probe(x, bn_);
        bn_cache_ = std::move(f.cache);
        output_ = std::move(f.output);
        return output_;
    }
    GeneralizedNormForward f = generalized_norm_forward(x, grouping_, bn_.gamma, bn_.beta, bn_.options.eps);
    gn_cache_ = std::move(f.cache);
    output_ = std::move(f.output);
    return output_;
}

Tensor NormLayer::backward(const Tensor& upstream) {
    if (bn_cache_) {
        BnGrads g = bn_backward(upstream, *bn_cache_, bn_);
        grad_gamma_ = std::move(g.grad_gamma);
        grad_beta_ = std::move(g.grad_beta);
        return std::move(g.grad_input);
    }
    if (gn_cache_) {
        GeneralizedNormGrads g = generalized_norm_backward(upstream, *gn_cache_, bn_.gamma);
        grad_gamma_ = std::move(g.grad_gamma);
        grad_beta_ = std::move(g.grad_beta);
        return std::move(g.grad_input);
    }
    throw CacheMismatchError("normalization backward without a training/probe forward pass");
}

void NormLayer::collect_params(std::vector<ParamRef>& out) {
    out.push_back({"norm.gamma", &bn_.gamma, &grad_gamma_, false});
    out.push_back({"norm.beta", &bn_.beta, &grad_beta_, false});
}

// ---- ResidualBlock ----------------------------------------------------------

ResidualBlock::ResidualBlock(std::vector<std::unique_ptr<Layer>> body, bool relu_after_add)
    : body_(std::move(body)), relu_after_add_(relu_after_add) {
    if (body_.empty()) throw ValueError("residual block needs a non-empty body");
}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) {
    if (x.rank() != 4) throw DimensionError("residual block expects [b,c,h,w]");
    input_shape_ = x.shape();
    Tensor h = x;
    for (auto& layer : body_) h = layer->forward(h, mode);
    if (h.rank() != 4 || h.dim(0) != x.dim(0) || h.dim(2) != x.dim(2) || h.dim(3) != x.dim(3) || h.dim(1) < x.dim(1))
        throw DimensionError("residual body output " + shape_string(h.shape()) + " incompatible with input " +
                             shape_string(x.shape()));
    const std::size_t nb = x.dim(0), ci = x.dim(1), co = h.dim(1), plane = x.dim(2) * x.dim(3);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t k = 0; k < plane; ++k) h[(b * co + c) * plane + k] += x[(b * ci + c) * plane + k];
    sum_ = h;
    if (!relu_after_add_) return h;
    for (auto& v : h.storage())
        if (!(v > 0.0) && !std::isnan(v)) v = 0.0;
    return h;
}

Tensor ResidualBlock::backward(const Tensor& upstream) {
    if (upstream.shape() != sum_.shape()) throw DimensionError("residual backward shape mismatch");
    Tensor g = upstream;
    if (relu_after_add_)
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!(sum_[i] > 0.0)) g[i] = 0.0;
    Tensor gin = g;
    for (auto it = body_.rbegin(); it != body_.rend(); ++it) gin = (*it)->backward(gin);
    const std::size_t nb = input_shape_[0], ci = input_shape_[1], co = sum_.dim(1);
    const std::size_t plane = input_shape_[2] * input_shape_[3];
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t k = 0; k < plane; ++k) gin[(b * ci + c) * plane + k] += g[(b * co + c) * plane + k];
    return gin;
}

void ResidualBlock::collect_params(std::vector<ParamRef>& out) {
    for (auto& layer : body_) layer->collect_params(out);
}

void ResidualBlock::collect_layers(std::vector<Layer*>& out) {
    out.push_back(this);
    for (auto& layer : body_) layer->collect_layers(out);
}

}  // namespace bnlab::nn
