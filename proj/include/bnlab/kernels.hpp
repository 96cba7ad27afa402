#pragma once

#include "bnlab/tensor.hpp"

// Numerical kernels shared by every module. Two implementations live side by
// side with identical signatures:
//
//   bnlab::kernels    OpenMP-parallel; what the library calls.
//   bnlab::reference  plain serial loops; kept for tests and benchmarks.
//
// Each output element is produced by exactly one thread and accumulates its
// terms in the same order as the reference loop, so the two agree bit for bit
// at any thread count.

namespace bnlab {

struct ConvGrads {
    Tensor grad_input;   // [b, c_in, h, w]
    Tensor grad_kernel;  // [c_out, c_in, 3, 3]
};

namespace kernels {

// [m,k] x [k,n] -> [m,n]; each entry sums over k in ascending order.
Tensor matmul(const Tensor& a, const Tensor& b);
// aᵀ b for a [k,m], b [k,n] -> [m,n].
Tensor matmul_at_b(const Tensor& a, const Tensor& b);
// a bᵀ for a [m,k], b [n,k] -> [m,n].
Tensor matmul_a_bt(const Tensor& a, const Tensor& b);

// 3x3 convolution, zero padding 1, stride 1:
//   out[b,o,x,y] = sum_{c} sum_{dx,dy in {-1,0,1}} in[b,c,x+dx,y+dy] * k[o,c,dx+1,dy+1]
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel);
ConvGrads conv2d_backward(const Tensor& upstream, const Tensor& input, const Tensor& kernel);

// Per-summand kernel-gradient terms
//   d[o,i,kx,ky,b,x,y] = upstream[b,o,x,y] * input[b,i,x+kx-1,y+ky-1]
// (zero where the shifted index falls in the padding). Summing over (b,x,y)
// reproduces grad_kernel. Memory is c_out*c_in*9*b*h*w doubles.
Tensor conv2d_summands(const Tensor& upstream, const Tensor& input);

// xᵀx for x [m,n] -> [n,n].
Tensor gram(const Tensor& x);

}  // namespace kernels

namespace reference {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_at_b(const Tensor& a, const Tensor& b);
Tensor matmul_a_bt(const Tensor& a, const Tensor& b);
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel);
ConvGrads conv2d_backward(const Tensor& upstream, const Tensor& input, const Tensor& kernel);
Tensor conv2d_summands(const Tensor& upstream, const Tensor& input);
Tensor gram(const Tensor& x);

}  // namespace reference

// Thread count used by the parallel kernels (OpenMP's, or 1 without OpenMP).
int kernel_threads();
void set_kernel_threads(int n);

}  // namespace bnlab
