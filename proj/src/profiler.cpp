#include "snn/profiler.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "snn/io_util.hpp"

namespace snn::profiler {

using nlohmann::json;

namespace {

std::size_t out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void validate_layer(const LayerSpec& l) {
  if (l.kind == LayerKind::kConv) {
    if (l.in_channels == 0 || l.out_channels == 0 || l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0) {
      throw std::invalid_argument("conv layer '" + l.name + "' has zero-sized channels/kernel/stride");
    }
    if (l.in_h + 2 * l.padding < l.kernel_h || l.in_w + 2 * l.padding < l.kernel_w) {
      throw std::invalid_argument("conv layer '" + l.name + "' kernel exceeds padded input");
    }
  } else if (l.kind == LayerKind::kLinear) {
    if (l.in_channels == 0 || l.out_channels == 0) {
      throw std::invalid_argument("linear layer '" + l.name + "' has zero features");
    }
  } else if (l.macs < 0 || l.params < 0) {
    throw std::invalid_argument("layer '" + l.name + "' has negative counts");
  }
}

LayerKind parse_kind(const std::string& s) {
  if (s == "conv") return LayerKind::kConv;
  if (s == "linear") return LayerKind::kLinear;
  if (s == "other") return LayerKind::kOther;
  throw std::invalid_argument("unknown layer kind '" + s + "'");
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kLinear:
      return "linear";
    case LayerKind::kOther:
      return "other";
  }
  return "other";
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0)) throw std::invalid_argument(std::string(what) + " must be non-negative");
}

}  // namespace

double layer_macs(const LayerSpec& l) {
  validate_layer(l);
  switch (l.kind) {
    case LayerKind::kConv: {
      const double oh = static_cast<double>(out_size(l.in_h, l.kernel_h, l.stride, l.padding));
      const double ow = static_cast<double>(out_size(l.in_w, l.kernel_w, l.stride, l.padding));
      return static_cast<double>(l.out_channels * l.in_channels * l.kernel_h * l.kernel_w) * oh * ow;
    }
    case LayerKind::kLinear:
      return static_cast<double>(l.in_channels * l.out_channels);
    case LayerKind::kOther:
      return l.macs;
  }
  return 0;
}

double layer_params(const LayerSpec& l) {
  validate_layer(l);
  switch (l.kind) {
    case LayerKind::kConv:
      return static_cast<double>(l.out_channels * l.in_channels * l.kernel_h * l.kernel_w +
                                 (l.bias ? l.out_channels : 0));
    case LayerKind::kLinear:
      return static_cast<double>(l.in_channels * l.out_channels + (l.bias ? l.out_channels : 0));
    case LayerKind::kOther:
      return l.params;
  }
  return 0;
}

bool receives_spikes(const ArchSpec& spec, std::size_t index) {
  const auto& l = spec.layers.at(index);
  if (l.spiking_input >= 0) return index > 0 && l.spiking_input == 1;
  return index > 0;
}

MacCounts count_macs(const ArchSpec& spec) {
  MacCounts counts;
  for (const auto& l : spec.layers) {
    counts.per_layer.push_back(layer_macs(l));
    counts.total += counts.per_layer.back();
  }
  return counts;
}

double count_encoding_macs(const ArchSpec& spec) {
  double total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!receives_spikes(spec, i)) total += layer_macs(spec.layers[i]) * static_cast<double>(spec.layers[i].mac_repeats);
  }
  return total;
}

double count_acs(const ArchSpec& spec, const ActivityTrace& trace) {
  if (trace.activity.size() > spec.layers.size()) {
    throw std::invalid_argument("activity trace has " + std::to_string(trace.activity.size()) + " entries for " +
                                std::to_string(spec.layers.size()) + " layers");
  }
  double total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!receives_spikes(spec, i)) continue;
    if (i >= trace.activity.size() || std::isnan(trace.activity[i])) {
      throw std::invalid_argument("activity trace is missing layer " + std::to_string(i + 1));
    }
    const double a = trace.activity[i];
    if (a < 0.0 || a > 1.0) {
      throw std::invalid_argument("activity of layer " + std::to_string(i + 1) + " outside [0,1]");
    }
    total += layer_macs(spec.layers[i]) * a;
  }
  return total * static_cast<double>(trace.timesteps);
}

double energy(double acs_g, double macs_g) {
  require_nonnegative(acs_g, "AC count");
  require_nonnegative(macs_g, "MAC count");
  return macs_g * kMacEnergyPj + acs_g * kAcEnergyPj;
}

double energy_ann(double macs_g) {
  require_nonnegative(macs_g, "MAC count");
  return macs_g * kMacEnergyPj;
}

EnergyReport build_report(const ArchSpec& spec, const ActivityTrace& trace) {
  EnergyReport r;
  r.arch = spec.name;
  r.acs_g = count_acs(spec, trace) / 1e9;
  r.macs_g = count_encoding_macs(spec) / 1e9;
  r.flops_g = 2.0 * count_macs(spec).total / 1e9;
  double params = 0;
  for (const auto& l : spec.layers) params += layer_params(l);
  r.params_m = params / 1e6;
  r.energy_mj = energy(r.acs_g, r.macs_g);
  return r;
}

// ---- report serialisation ----

ReportFormat parse_format(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "table") return ReportFormat::kTable;
  throw std::invalid_argument("unknown report format '" + name + "' (expected json, csv or table)");
}

std::string emit_report(const EnergyReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: {
      json j = {{"arch", r.arch},         {"acs_g", r.acs_g},         {"macs_g", r.macs_g},
                {"flops_g", r.flops_g},   {"params_m", r.params_m},   {"energy_mj", r.energy_mj},
                {"e_mac_pj", r.e_mac_pj}, {"e_ac_pj", r.e_ac_pj}};
      return j.dump(2) + "\n";
    }
    case ReportFormat::kCsv:
      return std::string(kCsvHeader) + "\n" + r.arch + "," + shortest(r.acs_g) + "," + shortest(r.macs_g) + "," +
             shortest(r.flops_g) + "," + shortest(r.params_m) + "," + shortest(r.energy_mj) + "\n";
    case ReportFormat::kTable: {
      std::ostringstream os;
      os << std::left << std::setw(14) << "Architecture" << std::right << std::setw(9) << "ACs(G)" << std::setw(9)
         << "MACs(G)" << std::setw(10) << "FLOPs(G)" << std::setw(10) << "Param(M)" << std::setw(12) << "Energy(mJ)"
         << "\n";
      os << std::left << std::setw(14) << r.arch << std::right << std::setw(9) << fixed(r.acs_g, 2) << std::setw(9)
         << fixed(r.macs_g, 2) << std::setw(10) << fixed(r.flops_g, 2) << std::setw(10) << fixed(r.params_m, 2)
         << std::setw(12) << fixed(r.energy_mj, 3) << "\n";
      return os.str();
    }
  }
  throw std::invalid_argument("unknown report format");
}

EnergyReport parse_report_json(const std::string& text) {
  const json j = json::parse(text);
  EnergyReport r;
  r.arch = j.at("arch").get<std::string>();
  r.acs_g = j.at("acs_g").get<double>();
  r.macs_g = j.at("macs_g").get<double>();
  r.flops_g = j.at("flops_g").get<double>();
  r.params_m = j.at("params_m").get<double>();
  r.energy_mj = j.at("energy_mj").get<double>();
  r.e_mac_pj = j.value("e_mac_pj", kMacEnergyPj);
  r.e_ac_pj = j.value("e_ac_pj", kAcEnergyPj);
  return r;
}

// ---- architecture files ----

ArchSpec arch_from_json(const std::string& text) {
  const json j = json::parse(text);
  ArchSpec spec;
  spec.name = j.value("name", std::string("model"));
  spec.timesteps = j.value("timesteps", std::size_t{1});
  for (const auto& jl : j.at("layers")) {
    LayerSpec l;
    l.kind = parse_kind(jl.at("kind").get<std::string>());
    l.name = jl.value("name", std::string(kind_name(l.kind)) + std::to_string(spec.layers.size() + 1));
    l.in_channels = jl.value("in_channels", std::size_t{0});
    l.out_channels = jl.value("out_channels", std::size_t{0});
    if (jl.contains("kernel")) {
      const auto& k = jl.at("kernel");
      l.kernel_h = k.is_array() ? k.at(0).get<std::size_t>() : k.get<std::size_t>();
      l.kernel_w = k.is_array() ? k.at(1).get<std::size_t>() : k.get<std::size_t>();
    }
    l.stride = jl.value("stride", std::size_t{1});
    l.padding = jl.value("padding", std::size_t{0});
    if (jl.contains("input_size")) {
      const auto& s = jl.at("input_size");
      l.in_h = s.is_array() ? s.at(0).get<std::size_t>() : s.get<std::size_t>();
      l.in_w = s.is_array() ? s.at(1).get<std::size_t>() : s.get<std::size_t>();
    }
    l.bias = jl.value("bias", true);
    if (jl.contains("spiking_input")) l.spiking_input = jl.at("spiking_input").get<bool>() ? 1 : 0;
    l.mac_repeats = jl.value("mac_repeats", std::uint64_t{1});
    l.macs = jl.value("macs", 0.0);
    l.params = jl.value("params", 0.0);
    validate_layer(l);
    spec.layers.push_back(std::move(l));
  }
  return spec;
}

std::string arch_to_json(const ArchSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json jl = {{"name", l.name}, {"kind", kind_name(l.kind)}};
    if (l.kind != LayerKind::kOther) {
      jl["in_channels"] = l.in_channels;
      jl["out_channels"] = l.out_channels;
      jl["bias"] = l.bias;
    }
    if (l.kind == LayerKind::kConv) {
      jl["kernel"] = {l.kernel_h, l.kernel_w};
      jl["stride"] = l.stride;
      jl["padding"] = l.padding;
      jl["input_size"] = {l.in_h, l.in_w};
    }
    if (l.kind == LayerKind::kOther) {
      jl["macs"] = l.macs;
      jl["params"] = l.params;
    }
    if (l.spiking_input >= 0) jl["spiking_input"] = l.spiking_input == 1;
    if (l.mac_repeats != 1) jl["mac_repeats"] = l.mac_repeats;
    layers.push_back(std::move(jl));
  }
  json j = {{"name", spec.name}, {"timesteps", spec.timesteps}, {"layers", layers}};
  return j.dump(2) + "\n";
}

ArchSpec load_arch(const std::string& path) { return arch_from_json(read_file(path)); }

ActivityTrace trace_from_csv(const std::string& text, std::size_t timesteps) {
  ActivityTrace trace;
  trace.timesteps = timesteps;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("layer", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("malformed activity row '" + line + "'");
    const std::size_t layer = std::stoul(trim(line.substr(0, comma)));
    const double a = std::stod(trim(line.substr(comma + 1)));
    if (layer == 0) throw std::invalid_argument("activity layers are numbered from 1");
    if (trace.activity.size() < layer) trace.activity.resize(layer, std::numeric_limits<double>::quiet_NaN());
    trace.activity[layer - 1] = a;
  }
  return trace;
}

std::string trace_to_csv(const ActivityTrace& trace) {
  std::string out = "layer,activity\n";
  for (std::size_t i = 0; i < trace.activity.size(); ++i) {
    if (std::isnan(trace.activity[i])) continue;
    out += std::to_string(i + 1) + "," + shortest(trace.activity[i]) + "\n";
  }
  return out;
}

ActivityTrace load_trace(const std::string& path, std::size_t timesteps) {
  return trace_from_csv(read_file(path), timesteps);
}

}  // namespace snn::profiler
