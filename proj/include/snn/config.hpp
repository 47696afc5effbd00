#pragma once

// Run configuration: a sectioned key/value file ("[train]\nlr = 0.1") merged
// with command-line overrides. Keys are addressed as "section.key".

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "snn/data.hpp"
#include "snn/model.hpp"
#include "snn/training.hpp"

namespace snn::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using ConfigMap = std::map<std::string, std::string>;

// Every recognised key with its default value.
const ConfigMap& defaults();

// Parses INI-style text. Quoted values are unquoted. Unknown sections or keys
// raise ConfigError naming them.
ConfigMap parse_config(const std::string& text);
ConfigMap load_config(const std::string& path);

// Later maps win. Keys must be known.
ConfigMap merge(const ConfigMap& base, const ConfigMap& overrides);

std::string to_ini(const ConfigMap& values);

struct DataConfig {
  std::string kind = "moving-bar";
  std::size_t train_size = 1024;
  std::size_t test_size = 256;
  std::uint64_t seed = 0;
  data::SynthOptions synth;
  std::string train_manifest;
  std::string test_manifest;
};

struct RunConfig {
  model::NetworkConfig net;
  training::TrainConfig train;
  DataConfig data;
};

// Builds and validates typed settings from a complete map (defaults merged in).
RunConfig build(const ConfigMap& values);

struct Datasets {
  data::Dataset train;
  data::Dataset test;
};

// Synthetic or manifest-backed datasets. Sets the network input shape and
// class count from the data.
Datasets load_datasets(RunConfig& cfg);

}  // namespace snn::config
