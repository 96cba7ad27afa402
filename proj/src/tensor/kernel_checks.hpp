#pragma once

#include <string>

#include "bnlab/error.hpp"
#include "bnlab/tensor.hpp"

namespace bnlab::detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank)
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_string(t.shape()));
}

struct MatmulDims {
    std::size_t m, k, n;
};

inline MatmulDims check_matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.dim(1) != b.dim(0))
        throw DimensionError("matmul inner dimensions disagree: " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    return {a.dim(0), a.dim(1), b.dim(1)};
}

inline MatmulDims check_matmul_at_b(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_at_b lhs");
    require_rank(b, 2, "matmul_at_b rhs");
    if (a.dim(0) != b.dim(0))
        throw DimensionError("matmul_at_b leading dimensions disagree: " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    return {a.dim(1), a.dim(0), b.dim(1)};
}

inline MatmulDims check_matmul_a_bt(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_a_bt lhs");
    require_rank(b, 2, "matmul_a_bt rhs");
    if (a.dim(1) != b.dim(1))
        throw DimensionError("matmul_a_bt trailing dimensions disagree: " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    return {a.dim(0), a.dim(1), b.dim(0)};
}

struct ConvDims {
    std::size_t batch, c_in, c_out, h, w;
};

inline ConvDims check_conv(const Tensor& input, const Tensor& kernel) {
    require_rank(input, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    if (kernel.dim(2) != 3 || kernel.dim(3) != 3)
        throw DimensionError("conv2d kernel must be 3x3, got " + shape_string(kernel.shape()));
    if (kernel.dim(1) != input.dim(1))
        throw DimensionError("conv2d channel mismatch: input " + shape_string(input.shape()) + ", kernel " +
                             shape_string(kernel.shape()));
    return {input.dim(0), input.dim(1), kernel.dim(0), input.dim(2), input.dim(3)};
}

inline ConvDims check_conv_backward(const Tensor& upstream, const Tensor& input, const Tensor& kernel) {
    const ConvDims d = check_conv(input, kernel);
    require_rank(upstream, 4, "conv2d upstream");
    if (upstream.shape() != Shape{d.batch, d.c_out, d.h, d.w})
        throw DimensionError("conv2d upstream shape " + shape_string(upstream.shape()) +
                             " does not match forward output");
    return d;
}

}  // namespace bnlab::detail
