#include "snn/tsrd.hpp"

#include <stdexcept>

#include "snn/neuron.hpp"
#include "snn/rng.hpp"

namespace snn::tsrd {

namespace {
constexpr std::uint64_t kMaskStream = 0x7473726400000000ULL;  // "tsrd"
}

void TsrdConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("TSRD beta must be in [0,1]");
}

bool bypass_bit(const TsrdConfig& cfg, std::uint64_t epoch, std::uint64_t batch, std::size_t layer, std::size_t t) {
  if (cfg.beta <= 0.0) return false;
  if (cfg.beta >= 1.0) return true;
  return counter_uniform({kMaskStream, cfg.seed, epoch, batch, layer, t}) < cfg.beta;
}

std::vector<bool> sample_mask(const TsrdConfig& cfg, std::size_t timesteps, std::uint64_t epoch, std::size_t layer,
                              std::uint64_t batch) {
  cfg.validate();
  if (timesteps == 0) throw std::invalid_argument("sample_mask: timesteps must be >= 1");
  std::vector<bool> mask(timesteps);
  for (std::size_t t = 0; t < timesteps; ++t) mask[t] = bypass_bit(cfg, epoch, batch, layer, t);
  return mask;
}

Tensor aggregate(const Tensor& x, const Tensor& h_prev, const staa::StaaParams& p, std::size_t t, bool mask_bit) {
  if (mask_bit) return neuron::adaptive_integrate(h_prev, x, p.coeffs);
  return staa::attend(x, h_prev, p, t);
}

}  // namespace snn::tsrd
