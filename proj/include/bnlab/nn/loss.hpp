#pragma once

#include <span>

#include "bnlab/tensor.hpp"

namespace bnlab::nn {

struct SoftmaxXent {
    double loss = 0.0;    // mean cross-entropy over the batch
    Tensor grad_logits;   // [b, K], rows (softmax - onehot) / b
};

SoftmaxXent softmax_xent(const Tensor& logits, std::span<const int> labels);

// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

// Per-example gradients dL_b/dlogit_{b,j} = softmax_{b,j} - [j == label_b],
// i.e. the undivided rows of softmax_xent's gradient.
Tensor per_example_logit_gradients(const Tensor& logits, std::span<const int> labels);

double accuracy(const Tensor& logits, std::span<const int> labels);

}  // namespace bnlab::nn
