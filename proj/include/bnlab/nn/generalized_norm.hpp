#pragma once

#include <string_view>
#include <vector>

#include "bnlab/tensor.hpp"

namespace bnlab::nn {

// Axes over which normalization statistics are pooled:
//   batch     (b, x, y) per channel
//   layer     (c, x, y) per sample
//   instance  (x, y) per sample and channel
//   group     (channels of one group, x, y) per sample
enum class GroupingKind { batch, layer, instance, group };

struct Grouping {
    GroupingKind kind = GroupingKind::batch;
    std::size_t groups = 1;  // group kind only; must divide the channel count

    static Grouping batch() { return {GroupingKind::batch, 1}; }
    static Grouping layer() { return {GroupingKind::layer, 1}; }
    static Grouping instance() { return {GroupingKind::instance, 1}; }
    static Grouping group(std::size_t g) { return {GroupingKind::group, g}; }
};

GroupingKind parse_grouping_kind(std::string_view name);
std::string_view to_string(GroupingKind kind);

struct GeneralizedNormCache {
    Tensor input;
    Tensor xhat;
    std::vector<double> inv_std;  // one per statistics group
    Grouping grouping;
};

struct GeneralizedNormForward {
    Tensor output;
    GeneralizedNormCache cache;
};

struct GeneralizedNormGrads {
    Tensor grad_input;
    Tensor grad_gamma;
    Tensor grad_beta;
};

// y = gamma_c * (x - mean_g) / sqrt(var_g + eps) + beta_c with statistics
// pooled per the grouping and affine parameters per channel. Batch grouping
// matches bn_forward_train (period 1, all toggles on) bit for bit.
GeneralizedNormForward generalized_norm_forward(const Tensor& input, Grouping grouping, const Tensor& gamma,
                                                const Tensor& beta, double eps = 1e-5);

Tensor generalized_norm(const Tensor& input, Grouping grouping, const Tensor& gamma, const Tensor& beta,
                        double eps = 1e-5);

GeneralizedNormGrads generalized_norm_backward(const Tensor& upstream, const GeneralizedNormCache& cache,
                                               const Tensor& gamma);

}  // namespace bnlab::nn
