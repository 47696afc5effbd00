#pragma once

// Convolutional spiking network unrolled over T timesteps.
//
// Each conv layer feeds a spiking neuron layer (plain LIF, adaptive LIF or
// STAA-LIF). The last spike map is flattened into a non-spiking linear
// readout whose per-step outputs are averaged over T to give the logits.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "snn/neuron.hpp"
#include "snn/profiler.hpp"
#include "snn/staa.hpp"
#include "snn/tensor.hpp"
#include "snn/tsrd.hpp"

namespace snn::model {

enum class NeuronKind { kLif, kAdaptive, kStaa };

NeuronKind parse_neuron_kind(const std::string& name);
std::string neuron_kind_name(NeuronKind kind);

struct ConvSpec {
  std::size_t out_channels = 16;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
};

struct NetworkConfig {
  std::string name = "staa-snn";
  std::size_t in_channels = 2;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t num_classes = 2;
  std::size_t timesteps = 4;
  std::vector<ConvSpec> convs{{16, 3, 1, 1}, {16, 3, 2, 1}};
  NeuronKind neuron = NeuronKind::kStaa;
  neuron::LifParams lif;
  staa::StaaOptions staa;
  // Multiplies the default uniform(+-1/sqrt(fan_in)) conv initialisation.
  double init_gain = 1.0;
  DType dtype = DType::f64;

  void validate() const;
};

struct ConvLayer {
  ConvSpec spec;
  std::size_t in_channels = 0;
  std::size_t in_h = 0, in_w = 0;
  std::size_t out_h = 0, out_w = 0;
  Tensor weight, bias;
  // Only the one matching the network's neuron kind is populated.
  neuron::AdaptiveCoeffs coeffs;
  staa::StaaParams staa;
};

struct ForwardOptions {
  bool training = false;
  // Null disables step dropout.
  const tsrd::TsrdConfig* tsrd = nullptr;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;
  neuron::SpikeMode mode = neuron::SpikeMode::kHeaviside;
  bool record_spikes = false;
};

struct ForwardResult {
  Tensor logits;                   // [N,K], mean over T
  std::vector<Tensor> step_logits; // per timestep
  std::vector<double> spike_count; // per spiking layer, summed over T
  std::vector<double> spike_slots; // entries per spiking layer, summed over T
  std::vector<std::vector<Tensor>> spikes;  // [layer][t] when recorded
  std::vector<std::vector<bool>> bypass;    // [layer][t]

  double activity(std::size_t layer) const;
};

class Network {
 public:
  static Network build(const NetworkConfig& cfg, std::uint64_t seed);

  // frames holds T tensors [N,C,H,W], or a single static frame that is
  // presented at every step (its encoding conv is then computed once).
  ForwardResult forward(const std::vector<Tensor>& frames, const ForwardOptions& opt = {}) const;

  std::vector<staa::NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  const NetworkConfig& config() const { return cfg_; }
  std::size_t spiking_layers() const { return convs_.size(); }
  std::vector<ConvLayer>& layers() { return convs_; }
  const std::vector<ConvLayer>& layers() const { return convs_; }

  // Layer list for the profiler: the convs, any STAA analog work (charged as
  // MACs every step) and the readout. static_input charges the encoding conv
  // once instead of T times.
  profiler::ArchSpec arch_spec(bool static_input) const;
  // Arch-layer activities (entry l = spikes entering arch layer l) from
  // per-spiking-layer activities, aligned with arch_spec().
  profiler::ActivityTrace activity_trace(const std::vector<double>& spiking_activity, bool static_input) const;

  Tensor readout_w, readout_b;

 private:
  NetworkConfig cfg_;
  std::vector<ConvLayer> convs_;
};

}  // namespace snn::model
