#pragma once

// Leaky integrate-and-fire dynamics with a rectangular surrogate gradient.
//
//   V  = H + (I - (H - v_reset)) / tau          (vanilla)
//   V  = M * H + N * I                           (adaptive, learnable M and N)
//   S  = heaviside(V - v_th)
//   H' = v_reset * S + V * (1 - S)
//
// The spike's backward rule is dS/dV = 1/a on |V - v_th| < a/2 and 0 elsewhere.

#include <cstddef>

#include "snn/tensor.hpp"

namespace snn::neuron {

struct LifParams {
  double tau = 2.0;
  double v_reset = 0.0;
  double v_th = 1.0;
  // Surrogate window width.
  double a = 1.0;

  void validate() const;
};

// kHeaviside emits binary spikes. kRamp replaces the forward with the clamp
// ramp whose exact derivative is the rectangular surrogate; only finite
// difference checks use it, so the whole network becomes piecewise smooth
// while backward stays the same.
enum class SpikeMode { kHeaviside, kRamp };

struct LifState {
  Tensor h;  // post-reset potential carried to the next step
  Tensor v;  // pre-spike potential of the most recent step
};

LifState initial_state(const Shape& shape, const LifParams& p, DType dt = DType::f64);

// Per-channel coefficients, shape [1,C,1,1].
struct AdaptiveCoeffs {
  Tensor m;
  Tensor n;

  // m = 1 - 1/tau, n = 1/tau: starts out identical to the vanilla neuron.
  static AdaptiveCoeffs vanilla(std::size_t channels, const LifParams& p, DType dt = DType::f64);
};

double surrogate_factor(double v, const LifParams& p);

Tensor heaviside_surrogate(const Tensor& v, const LifParams& p, SpikeMode mode = SpikeMode::kHeaviside);

struct StepResult {
  Tensor spikes;
  LifState state;
};

// Threshold and reset for an already-integrated membrane potential.
StepResult fire(const Tensor& v, const LifParams& p, SpikeMode mode = SpikeMode::kHeaviside);

StepResult lif_step(const LifState& state, const Tensor& input, const LifParams& p,
                    SpikeMode mode = SpikeMode::kHeaviside);

StepResult adaptive_lif_step(const LifState& state, const Tensor& input, const AdaptiveCoeffs& coeffs,
                             const LifParams& p, SpikeMode mode = SpikeMode::kHeaviside);

// M * H + N * I, broadcasting the coefficients.
Tensor adaptive_integrate(const Tensor& h, const Tensor& input, const AdaptiveCoeffs& coeffs);

}  // namespace snn::neuron
