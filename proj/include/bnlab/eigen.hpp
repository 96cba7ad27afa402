#pragma once

#include <vector>

#include "bnlab/tensor.hpp"

namespace bnlab {

// Eigenvalues of xᵀx (the squared singular values of x), ascending, clamped at
// zero. Computed by one-sided (Hestenes) Jacobi on the columns of x, which
// diagonalizes xᵀx implicitly and keeps small eigenvalues accurate to high
// relative precision.
std::vector<double> gram_eigenvalues(const Tensor& x);

// Eigenvalues of a symmetric matrix, ascending, by the cyclic Jacobi method.
std::vector<double> symmetric_eigenvalues(const Tensor& a);

}  // namespace bnlab
