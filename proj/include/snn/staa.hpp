#pragma once

// Spatio-temporal attention aggregation for LIF layers.
//
// Per layer and timestep t, with input current I and previous state H:
//
//   X = I + pos[t]                              position encoding
//   U = N * GC_in(X) + M * GC_state(H)          attention-refined aggregation
//   V = U * sigmoid(conv2(relu(conv1(alpha * avgpool(U)))))   step attention
//
// then the usual threshold/reset. GC(x) adds a per-channel context vector to x:
//
//   attn = sigmoid(conv_k(x))                   [N,1,H,W] -> [N,HW,1]
//   ctx  = reshape(x, [N,C,HW]) @ attn          [N,C,1,1]
//   x + conv_v(relu(layer_norm(conv_q(ctx))))   bottleneck of C/r channels

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "snn/neuron.hpp"
#include "snn/rng.hpp"
#include "snn/tensor.hpp"

namespace snn::staa {

using NamedTensor = std::pair<std::string, Tensor>;

inline constexpr double kLayerNormEps = 1e-5;

struct GcParams {
  std::size_t channels = 0;
  std::size_t r = 4;
  Tensor conv_k_w, conv_k_b;  // [1,C,1,1], [1]
  Tensor conv_q_w, conv_q_b;  // [C/r,C,1,1], [C/r]
  Tensor ln_gamma, ln_beta;   // [C/r]
  Tensor conv_v_w, conv_v_b;  // [C,C/r,1,1], [C]

  // Throws std::invalid_argument unless r divides channels. With
  // zero_value_branch the block starts as the identity.
  static GcParams init(std::size_t channels, std::size_t r, Rng& rng, DType dt = DType::f64,
                       bool zero_value_branch = true);
  std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
  std::size_t parameter_count() const;
};

// 2*C*C/r bottleneck weights, plus the C key weights, C/r + C + 1 biases and
// the 2*C/r layer-norm affine terms.
std::size_t gc_parameter_count(std::size_t channels, std::size_t r);

Tensor gc_forward(const Tensor& x, const GcParams& p);

struct PeTable {
  Tensor pos;  // [T,C], zero-initialised

  static PeTable init(std::size_t timesteps, std::size_t channels, DType dt = DType::f64);
};

Tensor pe_apply(const Tensor& x, const PeTable& table, std::size_t t);

struct SaParams {
  std::size_t channels = 0;
  std::size_t s = 16;
  double alpha = 2.0;
  Tensor conv1_w, conv1_b;  // [C/s,C,1,1], [C/s]
  Tensor conv2_w, conv2_b;  // [C,C/s,1,1], [C]

  // gate_bias is the constant initial conv2 bias; 0 starts the gate near 0.5.
  static SaParams init(std::size_t channels, std::size_t s, double alpha, Rng& rng, DType dt = DType::f64,
                       double gate_bias = 0.0);
  std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
};

// [N,C,1,1] gate in (0,1).
Tensor sa_gate(const Tensor& u, const SaParams& p);
Tensor sa_forward(const Tensor& u, const SaParams& p);

// Sub-block switches; a disabled block acts as the identity.
struct Blocks {
  bool gc = true;
  bool pe = true;
  bool sa = true;
};

struct StaaOptions {
  std::size_t r = 4;
  std::size_t s = 16;
  double alpha = 2.0;
  Blocks blocks;
  bool zero_value_branch = true;
  // Initial SA conv2 bias; sigmoid(3) ~ 0.95 lets the gate start near pass-through.
  double sa_gate_bias = 3.0;
};

struct StaaParams {
  GcParams gc_input;
  GcParams gc_state;
  PeTable pe;
  SaParams sa;
  neuron::AdaptiveCoeffs coeffs;
  Blocks blocks;

  static StaaParams init(std::size_t channels, std::size_t timesteps, const StaaOptions& opt,
                         const neuron::LifParams& lif, Rng& rng, DType dt = DType::f64);
  std::vector<NamedTensor> named_parameters(const std::string& prefix) const;
};

// Full attention path: pre-threshold membrane potential V.
Tensor attend(const Tensor& x, const Tensor& h_prev, const StaaParams& p, std::size_t t);

// One STAA-LIF step. With bypass set the attention path is skipped for this
// step and the plain adaptive aggregation M*H + N*X is used instead.
neuron::StepResult staa_lif_step(const Tensor& x, const neuron::LifState& state, const StaaParams& p,
                                 const neuron::LifParams& lif, std::size_t t, bool bypass = false,
                                 neuron::SpikeMode mode = neuron::SpikeMode::kHeaviside);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
Tensor uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng, DType dt);

}  // namespace snn::staa
