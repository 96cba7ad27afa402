#pragma once

#include <string_view>

#include "bnlab/rng.hpp"
#include "bnlab/tensor.hpp"

namespace bnlab {

enum class InitKind { xavier, he, gaussian };

struct InitScheme {
    InitKind kind = InitKind::xavier;
    double scale = 1.0;  // per-entry standard deviation, gaussian only
};

InitKind parse_init_kind(std::string_view name);
std::string_view to_string(InitKind kind);

struct FanCounts {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
};

// Dense weights are [out, in]; conv kernels [c_out, c_in, kh, kw] count the
// receptive field in both fans; rank-1 tensors use their length for both.
FanCounts fan_counts(const Shape& shape);

double init_variance(const InitScheme& scheme, FanCounts fans);

// Zero-mean Gaussian entries with the scheme's variance.
Tensor init_tensor(const Shape& shape, const InitScheme& scheme, SeededRng& rng);
Tensor init_tensor(const Shape& shape, const InitScheme& scheme, FanCounts fans, SeededRng& rng);

}  // namespace bnlab
