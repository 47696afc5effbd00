#pragma once

#include <string>
#include <vector>

#include "snn/tensor.hpp"

namespace snn::detail {

inline void require_same_dtype(const char* op, const Tensor& a, const Tensor& b) {
  if (a.dtype() != b.dtype()) {
    throw std::invalid_argument(std::string(op) + ": dtype mismatch (" + std::string(dtype_name(a.dtype())) + " vs " +
                                std::string(dtype_name(b.dtype())) + ")");
  }
}

inline void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.dim() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must be " + std::to_string(rank) + "-D, got " +
                     to_string(t.shape()));
  }
}

// Strides of `in` laid over `out` (right-aligned); broadcast dims get stride 0.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t i = in.size() - 1 - k;
    const std::size_t o = out.size() - 1 - k;
    strides[o] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) over every element of `out` in row-major order.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb,
                        F&& f) {
  if (out.empty()) {
    f(0, 0, 0);
    return;
  }
  const std::size_t rank = out.size();
  const std::size_t inner = out[rank - 1];
  const std::size_t ia = sa[rank - 1];
  const std::size_t ib = sb[rank - 1];
  const std::size_t outer = numel(out) / inner;
  std::vector<std::size_t> idx(rank - 1, 0);
  std::size_t off_a = 0;
  std::size_t off_b = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * inner;
    for (std::size_t j = 0; j < inner; ++j) f(base + j, off_a + j * ia, off_b + j * ib);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      off_a += sa[d];
      off_b += sb[d];
      if (idx[d] < out[d]) break;
      off_a -= sa[d] * out[d];
      off_b -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

}  // namespace snn::detail
