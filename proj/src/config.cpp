#include "snn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <sstream>

#include "snn/io_util.hpp"

namespace snn::config {

const ConfigMap& defaults() {
  static const ConfigMap d{
      {"model.neuron", "staa"},
      {"model.channels", "16,16"},
      {"model.strides", "1,2"},
      {"model.kernel", "3"},
      {"model.init_gain", "6"},
      {"model.tau", "2"},
      {"model.v_th", "1"},
      {"model.v_reset", "0"},
      {"model.surrogate_width", "1"},
      {"model.alpha", "2"},
      {"model.r", "4"},
      {"model.s", "16"},
      {"model.sa_gate_bias", "3"},
      {"model.zero_value_branch", "true"},
      {"model.blocks", "gc,pe,sa"},
      {"model.dtype", "f64"},
      {"train.lr", "0.1"},
      {"train.lr_min", "0"},
      {"train.momentum", "0.9"},
      {"train.epochs", "30"},
      {"train.batch_size", "32"},
      {"train.timesteps", "4"},
      {"train.seed", "0"},
      {"train.weight_decay", "0"},
      {"train.beta", "0.1"},
      {"train.augment", "false"},
      {"train.mixup", "0"},
      {"train.grad_clip", "1"},
      {"train.crop_pad", "4"},
      {"train.cutout", "8"},
      {"data.kind", "moving-bar"},
      {"data.train_size", "1024"},
      {"data.test_size", "256"},
      {"data.seed", "0"},
      {"data.height", "8"},
      {"data.width", "8"},
      {"data.noise_events", "8"},
      {"data.train_manifest", ""},
      {"data.test_manifest", ""},
  };
  return d;
}

namespace {

void require_known(const std::string& key) {
  if (!defaults().contains(key)) throw ConfigError("unknown config key '" + key + "'");
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) return v.substr(1, v.size() - 2);
  return v;
}

const std::string& get(const ConfigMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

double as_double(const ConfigMap& m, const std::string& key) {
  const auto& v = get(m, key);
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return out;
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  }
  return out;
}

std::uint64_t as_uint(const ConfigMap& m, const std::string& key) { return as_uint(key, get(m, key)); }

bool as_bool(const ConfigMap& m, const std::string& key) {
  const auto& v = get(m, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::vector<std::string> as_list(const ConfigMap& m, const std::string& key) {
  std::vector<std::string> out;
  std::istringstream in(get(m, key));
  std::string item;
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

ConfigMap parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ConfigMap out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      require_known(full);
      out[full] = unquote(trim(value.data()));
    }
  }
  return out;
}

ConfigMap load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error&) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  try {
    return parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ConfigMap merge(const ConfigMap& base, const ConfigMap& overrides) {
  ConfigMap out = base;
  for (const auto& [k, v] : overrides) {
    require_known(k);
    out[k] = v;
  }
  return out;
}

std::string to_ini(const ConfigMap& values) {
  std::string out;
  std::string section;
  for (const auto& [key, value] : values) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      out += (out.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

RunConfig build(const ConfigMap& in) {
  const ConfigMap m = merge(defaults(), in);
  RunConfig rc;

  auto& net = rc.net;
  net.neuron = model::parse_neuron_kind(get(m, "model.neuron"));
  const auto channels = as_list(m, "model.channels");
  const auto strides = as_list(m, "model.strides");
  if (channels.empty()) throw ConfigError("model.channels: need at least one conv layer");
  if (strides.size() != channels.size()) throw ConfigError("model.strides must list one stride per conv layer");
  const auto kernel = as_uint(m, "model.kernel");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("model.kernel must be odd");
  net.convs.clear();
  for (std::size_t i = 0; i < channels.size(); ++i) {
    net.convs.push_back({as_uint("model.channels", channels[i]), kernel, as_uint("model.strides", strides[i]),
                         kernel / 2});
  }
  net.init_gain = as_double(m, "model.init_gain");
  net.lif.tau = as_double(m, "model.tau");
  net.lif.v_th = as_double(m, "model.v_th");
  net.lif.v_reset = as_double(m, "model.v_reset");
  net.lif.a = as_double(m, "model.surrogate_width");
  net.staa.alpha = as_double(m, "model.alpha");
  net.staa.r = as_uint(m, "model.r");
  net.staa.s = as_uint(m, "model.s");
  net.staa.sa_gate_bias = as_double(m, "model.sa_gate_bias");
  net.staa.zero_value_branch = as_bool(m, "model.zero_value_branch");
  net.staa.blocks = {false, false, false};
  for (const auto& b : as_list(m, "model.blocks")) {
    if (b == "gc") {
      net.staa.blocks.gc = true;
    } else if (b == "pe") {
      net.staa.blocks.pe = true;
    } else if (b == "sa") {
      net.staa.blocks.sa = true;
    } else if (b != "none") {
      throw ConfigError("model.blocks: unknown block '" + b + "' (expected gc, pe, sa or none)");
    }
  }
  const auto& dtype = get(m, "model.dtype");
  if (dtype == "f64") {
    net.dtype = DType::f64;
  } else if (dtype == "f32") {
    net.dtype = DType::f32;
  } else {
    throw ConfigError("model.dtype must be f64 or f32");
  }
  net.timesteps = as_uint(m, "train.timesteps");

  auto& tc = rc.train;
  tc.lr = as_double(m, "train.lr");
  tc.lr_min = as_double(m, "train.lr_min");
  tc.momentum = as_double(m, "train.momentum");
  tc.epochs = as_uint(m, "train.epochs");
  tc.batch_size = as_uint(m, "train.batch_size");
  tc.seed = as_uint(m, "train.seed");
  tc.weight_decay = as_double(m, "train.weight_decay");
  tc.tsrd.beta = as_double(m, "train.beta");
  tc.tsrd.seed = tc.seed;
  tc.augment = as_bool(m, "train.augment");
  tc.mixup = as_double(m, "train.mixup");
  tc.grad_clip = as_double(m, "train.grad_clip");
  tc.policy.crop_pad = as_uint(m, "train.crop_pad");
  tc.policy.cutout_size = as_uint(m, "train.cutout");

  auto& dc = rc.data;
  dc.kind = get(m, "data.kind");
  dc.train_size = as_uint(m, "data.train_size");
  dc.test_size = as_uint(m, "data.test_size");
  dc.seed = as_uint(m, "data.seed");
  dc.synth.height = as_uint(m, "data.height");
  dc.synth.width = as_uint(m, "data.width");
  dc.synth.noise_events = as_uint(m, "data.noise_events");
  dc.synth.timesteps = net.timesteps;
  dc.train_manifest = get(m, "data.train_manifest");
  dc.test_manifest = get(m, "data.test_manifest");
  if (dc.kind == "manifest") {
    if (dc.train_manifest.empty()) throw ConfigError("data.kind = manifest needs data.train_manifest");
  } else {
    data::parse_synth_kind(dc.kind);
    if (dc.train_size == 0) throw ConfigError("data.train_size must be >= 1");
  }

  try {
    net.validate();
    tc.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

Datasets load_datasets(RunConfig& cfg) {
  Datasets out;
  const auto& dc = cfg.data;
  if (dc.kind == "manifest") {
    out.train = data::load_manifest(dc.train_manifest, cfg.net.timesteps);
    if (!dc.test_manifest.empty()) out.test = data::load_manifest(dc.test_manifest, cfg.net.timesteps, out.train.num_classes);
  } else {
    const auto kind = data::parse_synth_kind(dc.kind);
    out.train = data::synth_dataset(kind, dc.train_size, dc.seed, dc.synth);
    if (dc.test_size > 0) out.test = data::synth_dataset(kind, dc.test_size, dc.seed + 1000003, dc.synth);
  }
  if (out.train.timesteps != 1 && out.train.timesteps != cfg.net.timesteps) {
    throw ConfigError("dataset has " + std::to_string(out.train.timesteps) + " frames per sample but train.timesteps is " +
                      std::to_string(cfg.net.timesteps));
  }
  cfg.net.in_channels = out.train.channels;
  cfg.net.height = out.train.height;
  cfg.net.width = out.train.width;
  cfg.net.num_classes = out.train.num_classes;
  cfg.net.validate();
  return out;
}

}  // namespace snn::config
