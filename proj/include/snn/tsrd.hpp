#pragma once

// Time-step random dropout: during training each (layer, timestep) independently
// skips the attention path with probability beta and falls back to the plain
// adaptive aggregation. Masks come from a counter-based generator keyed by
// (seed, epoch, batch, layer, t), so they do not depend on evaluation order.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "snn/staa.hpp"

namespace snn::tsrd {

struct TsrdConfig {
  double beta = 0.1;
  std::uint64_t seed = 0;
  bool enabled_in_eval = false;

  void validate() const;
};

bool bypass_bit(const TsrdConfig& cfg, std::uint64_t epoch, std::uint64_t batch, std::size_t layer, std::size_t t);

// true = bypass the attention path at that timestep.
std::vector<bool> sample_mask(const TsrdConfig& cfg, std::size_t timesteps, std::uint64_t epoch, std::size_t layer,
                              std::uint64_t batch = 0);

// Pre-threshold membrane potential for one step.
Tensor aggregate(const Tensor& x, const Tensor& h_prev, const staa::StaaParams& p, std::size_t t, bool mask_bit);

}  // namespace snn::tsrd
