#include "bnlab/nn/sgd.hpp"

#include <cmath>

#include "bnlab/error.hpp"

namespace bnlab::nn {

SgdState::SgdState(SgdOptions options) : options_(std::move(options)) {
    if (!(options_.base_lr > 0.0)) throw ValueError("base learning rate must be positive");
    if (!(options_.momentum >= 0.0 && options_.momentum < 1.0)) throw ValueError("momentum must lie in [0, 1)");
    if (!(options_.weight_decay >= 0.0)) throw ValueError("weight decay must be non-negative");
    for (const auto& [threshold, divisor] : options_.schedule.drops)
        if (!(divisor >= 1.0)) throw ValueError("schedule divisors must be >= 1 (rate is non-increasing)");
}

double SgdState::lr_at(double epoch_fraction) const {
    double lr = options_.base_lr;
    for (const auto& [threshold, divisor] : options_.schedule.drops)
        if (epoch_fraction >= threshold) lr /= divisor;
    return lr;
}

SgdStepResult sgd_step(std::span<const ParamRef> params, SgdState& state, double epoch_fraction) {
    auto& vel = state.velocity();
    if (vel.empty()) {
        vel.reserve(params.size());
        for (const auto& p : params) vel.emplace_back(p.value->shape());
    }
    if (vel.size() != params.size()) throw DimensionError("parameter list changed between SGD steps");

    const auto& opt = state.options();
    SgdStepResult result{state.lr_at(epoch_fraction), false};
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k].value;
        const Tensor& g = *params[k].grad;
        Tensor& v = vel[k];
        if (p.shape() != g.shape() || p.shape() != v.shape())
            throw DimensionError("parameter, gradient, and velocity shapes disagree for " + params[k].name);
        const double wd = params[k].decay ? opt.weight_decay : 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i])) result.non_finite_gradient = true;
            double step = g[i];
            if (wd != 0.0) step += wd * p[i];
            v[i] = opt.momentum * v[i] + step;
            p[i] -= result.lr * v[i];
        }
    }
    return result;
}

}  // namespace bnlab::nn
