#pragma once

// Operation counting and energy estimation for spiking networks.
//
//   #MAC = sum_l MAC_l
//   #AC  = sum_{l>=2} MAC_l * a_l * T
//   E    = #MAC_1 * E_MAC + #AC * E_AC         (E_MAC = 4.6 pJ, E_AC = 0.9 pJ)
//
// a_l is the average activity of the spikes entering layer l. Layers that
// receive analog input (the first, encoding layer and any layer flagged
// spiking_input = false) are charged as MACs instead of ACs. With op counts in
// giga-ops and energies in pJ the energy comes out in millijoules.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace snn::profiler {

inline constexpr double kMacEnergyPj = 4.6;
inline constexpr double kAcEnergyPj = 0.9;

enum class LayerKind { kConv, kLinear, kOther };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  // conv: channels; linear: features
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  bool bias = true;
  // Unset: true for every layer except the first.
  int spiking_input = -1;
  // MAC-charged layers whose work repeats (e.g. once per timestep).
  std::uint64_t mac_repeats = 1;
  // kOther only: explicit per-inference counts.
  double macs = 0;
  double params = 0;
};

struct ArchSpec {
  std::string name;
  std::size_t timesteps = 1;
  std::vector<LayerSpec> layers;
};

// Per-layer spike activity, indexed like ArchSpec::layers. Entry 0 (the
// encoding layer) is not used by the AC count and may be NaN.
struct ActivityTrace {
  std::vector<double> activity;
  std::size_t timesteps = 1;
};

struct EnergyReport {
  std::string arch;
  double acs_g = 0;
  double macs_g = 0;
  double flops_g = 0;
  double params_m = 0;
  double energy_mj = 0;
  double e_mac_pj = kMacEnergyPj;
  double e_ac_pj = kAcEnergyPj;

  bool operator==(const EnergyReport&) const = default;
};

double layer_macs(const LayerSpec& layer);
double layer_params(const LayerSpec& layer);
bool receives_spikes(const ArchSpec& spec, std::size_t index);

struct MacCounts {
  std::vector<double> per_layer;
  double total = 0;
};

MacCounts count_macs(const ArchSpec& spec);
// MACs charged at E_MAC: layers fed by analog input, times their mac_repeats.
double count_encoding_macs(const ArchSpec& spec);
double count_acs(const ArchSpec& spec, const ActivityTrace& trace);

double energy(double acs_g, double macs_g);
double energy_ann(double macs_g);

EnergyReport build_report(const ArchSpec& spec, const ActivityTrace& trace);

enum class ReportFormat { kJson, kCsv, kTable };
ReportFormat parse_format(const std::string& name);
std::string emit_report(const EnergyReport& report, ReportFormat format);
EnergyReport parse_report_json(const std::string& text);
inline constexpr const char* kCsvHeader = "arch,acs_g,macs_g,flops_g,params_m,energy_mj";

ArchSpec arch_from_json(const std::string& text);
std::string arch_to_json(const ArchSpec& spec);
ArchSpec load_arch(const std::string& path);

// CSV with header "layer,activity"; layer numbers are 1-based.
ActivityTrace trace_from_csv(const std::string& text, std::size_t timesteps);
std::string trace_to_csv(const ActivityTrace& trace);
ActivityTrace load_trace(const std::string& path, std::size_t timesteps);

}  // namespace snn::profiler
