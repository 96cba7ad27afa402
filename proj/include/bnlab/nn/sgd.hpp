#pragma once

#include <span>
#include <utility>
#include <vector>

#include "bnlab/nn/layers.hpp"

namespace bnlab::nn {

// Piecewise-constant schedule: once the training fraction reaches a
// threshold, the rate is divided by that entry's divisor (cumulatively).
struct LrSchedule {
    std::vector<std::pair<double, double>> drops{{0.5, 10.0}, {0.75, 10.0}};
};

struct SgdOptions {
    double base_lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LrSchedule schedule;
};

class SgdState {
public:
    explicit SgdState(SgdOptions options = {});

    const SgdOptions& options() const noexcept { return options_; }
    double lr_at(double epoch_fraction) const;
    const std::vector<Tensor>& velocity() const noexcept { return velocity_; }
    std::vector<Tensor>& velocity() noexcept { return velocity_; }

private:
    SgdOptions options_;
    std::vector<Tensor> velocity_;
};

struct SgdStepResult {
    double lr = 0.0;
    bool non_finite_gradient = false;
};

// v <- m v + (g + wd p)   (wd only for parameters flagged for decay)
// p <- p - lr(epoch_fraction) v
// Non-finite gradients are applied as-is and flagged.
SgdStepResult sgd_step(std::span<const ParamRef> params, SgdState& state, double epoch_fraction);

}  // namespace bnlab::nn
