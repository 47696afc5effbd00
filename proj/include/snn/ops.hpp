#pragma once

// Differentiable operations over snn::Tensor.
//
// All binary ops require matching dtypes. Elementwise binary ops broadcast
// numpy-style (trailing alignment, size-1 dims stretch); their gradients are
// summed back over the broadcast dims so grad shapes always equal input shapes.

#include <cstddef>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// Normalises each sample over all non-batch dims, then applies a per-channel
// (dim 1) affine transform. gamma and beta have shape [C].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// floor((in + 2*padding - kernel) / stride) + 1
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

// Direct cross-correlation. x [N,Cin,H,W], w [Cout,Cin,kh,kw], bias [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, Conv2dOptions opt = {});

// [N,C,H,W] -> [N,C,1,1]
Tensor global_avg_pool(const Tensor& x);

// a [...,m,k] x b [...,k,n]. Batch dims must match, or either side may be 2-D.
Tensor matmul(const Tensor& a, const Tensor& b);

// x [N,F], w [K,F], bias [K] -> [N,K]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Row `index` of a 2-D table, shape [cols].
Tensor select_row(const Tensor& table, std::size_t index);

// Mean negative log-likelihood of softmax(logits) at the given labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);
// Soft-target variant; targets [N,K] rows are probability vectors.
Tensor cross_entropy(const Tensor& logits, const Tensor& targets);

}  // namespace snn
