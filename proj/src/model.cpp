#include "snn/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "snn/ops.hpp"
#include "snn/rng.hpp"

namespace snn::model {

NeuronKind parse_neuron_kind(const std::string& name) {
  if (name == "lif") return NeuronKind::kLif;
  if (name == "adaptive") return NeuronKind::kAdaptive;
  if (name == "staa") return NeuronKind::kStaa;
  throw std::invalid_argument("unknown neuron kind '" + name + "' (expected lif, adaptive or staa)");
}

std::string neuron_kind_name(NeuronKind kind) {
  switch (kind) {
    case NeuronKind::kLif: return "lif";
    case NeuronKind::kAdaptive: return "adaptive";
    case NeuronKind::kStaa: return "staa";
  }
  return "?";
}

void NetworkConfig::validate() const {
  if (in_channels == 0 || height == 0 || width == 0) throw std::invalid_argument("input shape must be positive");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (timesteps == 0) throw std::invalid_argument("timesteps must be >= 1");
  if (convs.empty()) throw std::invalid_argument("network needs at least one conv layer");
  if (!(init_gain > 0)) throw std::invalid_argument("init_gain must be > 0");
  lif.validate();
  for (const auto& c : convs) {
    if (c.out_channels == 0 || c.kernel == 0 || c.stride == 0) {
      throw std::invalid_argument("conv layer sizes must be positive");
    }
  }
}

double ForwardResult::activity(std::size_t layer) const {
  if (layer >= spike_count.size() || spike_slots[layer] == 0) return 0.0;
  return spike_count[layer] / spike_slots[layer];
}

Network Network::build(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Network net;
  net.cfg_ = cfg;
  Rng rng(seed);
  std::size_t c = cfg.in_channels, h = cfg.height, w = cfg.width;
  for (const auto& spec : cfg.convs) {
    ConvLayer layer;
    layer.spec = spec;
    layer.in_channels = c;
    layer.in_h = h;
    layer.in_w = w;
    layer.out_h = conv_output_size(h, spec.kernel, spec.stride, spec.padding);
    layer.out_w = conv_output_size(w, spec.kernel, spec.stride, spec.padding);
    const std::size_t fan_in = c * spec.kernel * spec.kernel;
    layer.weight = staa::uniform_init({spec.out_channels, c, spec.kernel, spec.kernel}, fan_in, rng, cfg.dtype);
    layer.bias = staa::uniform_init({spec.out_channels}, fan_in, rng, cfg.dtype);
    if (cfg.init_gain != 1.0) {
      for (auto* t : {&layer.weight, &layer.bias}) {
        dispatch(cfg.dtype, [&](auto tag) {
          using T = decltype(tag);
          for (auto& v : t->mutable_data<T>()) v = static_cast<T>(v * cfg.init_gain);
        });
      }
    }
    if (cfg.neuron == NeuronKind::kAdaptive) {
      layer.coeffs = neuron::AdaptiveCoeffs::vanilla(spec.out_channels, cfg.lif, cfg.dtype);
    } else if (cfg.neuron == NeuronKind::kStaa) {
      layer.staa = staa::StaaParams::init(spec.out_channels, cfg.timesteps, cfg.staa, cfg.lif, rng, cfg.dtype);
    }
    c = spec.out_channels;
    h = layer.out_h;
    w = layer.out_w;
    net.convs_.push_back(std::move(layer));
  }
  const std::size_t features = c * h * w;
  net.readout_w = staa::uniform_init({cfg.num_classes, features}, features, rng, cfg.dtype);
  net.readout_b = staa::uniform_init({cfg.num_classes}, features, rng, cfg.dtype);
  return net;
}

ForwardResult Network::forward(const std::vector<Tensor>& frames, const ForwardOptions& opt) const {
  const std::size_t T = cfg_.timesteps;
  if (frames.size() != T && frames.size() != 1) {
    throw std::invalid_argument("forward: expected " + std::to_string(T) + " frames or one static frame, got " +
                                std::to_string(frames.size()));
  }
  const bool is_static = frames.size() == 1 && T > 1;
  for (const auto& f : frames) {
    if (f.dim() != 4 || f.size(1) != cfg_.in_channels || f.size(2) != cfg_.height || f.size(3) != cfg_.width) {
      throw ShapeError("forward: frame shape " + to_string(f.shape()) + " does not match network input [N," +
                       std::to_string(cfg_.in_channels) + "," + std::to_string(cfg_.height) + "," +
                       std::to_string(cfg_.width) + "]");
    }
    if (f.dtype() != cfg_.dtype) throw std::invalid_argument("forward: frame dtype does not match network dtype");
  }
  const std::size_t n = frames.front().size(0);
  const std::size_t L = convs_.size();
  const bool use_tsrd = cfg_.neuron == NeuronKind::kStaa && opt.tsrd != nullptr &&
                        (opt.training || opt.tsrd->enabled_in_eval);

  ForwardResult out;
  out.spike_count.assign(L, 0.0);
  out.spike_slots.assign(L, 0.0);
  out.bypass.assign(L, std::vector<bool>(T, false));
  if (opt.record_spikes) out.spikes.assign(L, {});
  if (use_tsrd) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t t = 0; t < T; ++t) out.bypass[l][t] = tsrd::bypass_bit(*opt.tsrd, opt.epoch, opt.batch, l, t);
    }
  }

  std::vector<neuron::LifState> states;
  for (const auto& layer : convs_) {
    states.push_back(neuron::initial_state({n, layer.spec.out_channels, layer.out_h, layer.out_w}, cfg_.lif,
                                           cfg_.dtype));
  }

  const Conv2dOptions first_opt{convs_[0].spec.stride, convs_[0].spec.padding};
  Tensor static_current;
  if (is_static) static_current = conv2d(frames[0], convs_[0].weight, convs_[0].bias, first_opt);

  Tensor logit_sum;
  for (std::size_t t = 0; t < T; ++t) {
    Tensor x;
    for (std::size_t l = 0; l < L; ++l) {
      const auto& layer = convs_[l];
      Tensor current;
      if (l == 0) {
        current = is_static ? static_current : conv2d(frames[t], layer.weight, layer.bias, first_opt);
      } else {
        current = conv2d(x, layer.weight, layer.bias, {layer.spec.stride, layer.spec.padding});
      }
      neuron::StepResult step;
      switch (cfg_.neuron) {
        case NeuronKind::kLif:
          step = neuron::lif_step(states[l], current, cfg_.lif, opt.mode);
          break;
        case NeuronKind::kAdaptive:
          step = neuron::adaptive_lif_step(states[l], current, layer.coeffs, cfg_.lif, opt.mode);
          break;
        case NeuronKind::kStaa:
          step = staa::staa_lif_step(current, states[l], layer.staa, cfg_.lif, t, out.bypass[l][t], opt.mode);
          break;
      }
      states[l] = step.state;
      x = step.spikes;
      dispatch(cfg_.dtype, [&](auto tag) {
        using T_ = decltype(tag);
        double s = 0;
        for (T_ v : x.data<T_>()) s += static_cast<double>(v);
        out.spike_count[l] += s;
      });
      out.spike_slots[l] += static_cast<double>(x.numel());
      if (opt.record_spikes) out.spikes[l].push_back(x.detach());
    }
    Tensor flat = reshape(x, {n, x.numel() / n});
    Tensor step_logits = linear(flat, readout_w, readout_b);
    out.step_logits.push_back(step_logits);
    logit_sum = t == 0 ? step_logits : add(logit_sum, step_logits);
  }
  out.logits = T == 1 ? logit_sum : mul_scalar(logit_sum, 1.0 / static_cast<double>(T));
  return out;
}

std::vector<staa::NamedTensor> Network::named_parameters() const {
  std::vector<staa::NamedTensor> out;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    const auto& layer = convs_[l];
    const std::string idx = std::to_string(l + 1);
    out.emplace_back("conv" + idx + ".weight", layer.weight);
    out.emplace_back("conv" + idx + ".bias", layer.bias);
    if (cfg_.neuron == NeuronKind::kAdaptive) {
      out.emplace_back("lif" + idx + ".adaptive.m", layer.coeffs.m);
      out.emplace_back("lif" + idx + ".adaptive.n", layer.coeffs.n);
    } else if (cfg_.neuron == NeuronKind::kStaa) {
      for (auto& p : layer.staa.named_parameters("lif" + idx + ".")) out.push_back(std::move(p));
    }
  }
  out.emplace_back("readout.weight", readout_w);
  out.emplace_back("readout.bias", readout_b);
  return out;
}

std::vector<Tensor> Network::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : named_parameters()) total += t.numel();
  return total;
}

profiler::ArchSpec Network::arch_spec(bool static_input) const {
  profiler::ArchSpec spec;
  spec.name = cfg_.name;
  spec.timesteps = cfg_.timesteps;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    const auto& layer = convs_[l];
    profiler::LayerSpec s;
    s.name = "conv" + std::to_string(l + 1);
    s.kind = profiler::LayerKind::kConv;
    s.in_channels = layer.in_channels;
    s.out_channels = layer.spec.out_channels;
    s.kernel_h = s.kernel_w = layer.spec.kernel;
    s.stride = layer.spec.stride;
    s.padding = layer.spec.padding;
    s.in_h = layer.in_h;
    s.in_w = layer.in_w;
    s.spiking_input = l == 0 ? 0 : 1;
    s.mac_repeats = l == 0 && !static_input ? cfg_.timesteps : 1;
    spec.layers.push_back(s);

    if (cfg_.neuron == NeuronKind::kStaa) {
      const auto& p = layer.staa;
      const double c = static_cast<double>(layer.spec.out_channels);
      const double hw = static_cast<double>(layer.out_h * layer.out_w);
      double macs = 0;
      double params = 0;
      if (p.blocks.gc) {
        const double hidden = c / static_cast<double>(p.gc_input.r);
        // key conv + context matmul + two bottleneck convs, for input and state
        macs += 2.0 * (c * hw + c * hw + 2.0 * c * hidden);
        params += static_cast<double>(p.gc_input.parameter_count() + p.gc_state.parameter_count());
      }
      if (p.blocks.sa) {
        macs += 2.0 * c * (c / static_cast<double>(p.sa.s));
        for (const auto& [name, t] : p.sa.named_parameters("")) params += static_cast<double>(t.numel());
      }
      if (p.blocks.pe) params += static_cast<double>(p.pe.pos.numel());
      params += static_cast<double>(p.coeffs.m.numel() + p.coeffs.n.numel());
      profiler::LayerSpec o;
      o.name = "staa" + std::to_string(l + 1);
      o.kind = profiler::LayerKind::kOther;
      o.macs = macs;
      o.params = params;
      o.spiking_input = 0;
      o.mac_repeats = cfg_.timesteps;
      spec.layers.push_back(o);
    }
  }
  profiler::LayerSpec r;
  r.name = "readout";
  r.kind = profiler::LayerKind::kLinear;
  r.in_channels = readout_w.size(1);
  r.out_channels = readout_w.size(0);
  r.spiking_input = 1;
  spec.layers.push_back(r);
  return spec;
}

profiler::ActivityTrace Network::activity_trace(const std::vector<double>& spiking_activity, bool static_input) const {
  if (spiking_activity.size() != convs_.size()) {
    throw std::invalid_argument("activity_trace: expected " + std::to_string(convs_.size()) + " layer activities");
  }
  const auto spec = arch_spec(static_input);
  profiler::ActivityTrace trace;
  trace.timesteps = cfg_.timesteps;
  trace.activity.assign(spec.layers.size(), std::numeric_limits<double>::quiet_NaN());
  // Spikes entering a conv or the readout come from the previous spiking layer.
  std::size_t spiking_seen = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == profiler::LayerKind::kOther) continue;
    if (spiking_seen > 0) trace.activity[i] = spiking_activity[spiking_seen - 1];
    ++spiking_seen;
  }
  return trace;
}

}  // namespace snn::model
