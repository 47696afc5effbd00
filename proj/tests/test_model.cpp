#include "doctest.h"
#include "snn/model.hpp"
#include "snn/ops.hpp"

using namespace snn;
using namespace snn::model;

namespace {
std::vector<Tensor> frames(std::size_t T, std::size_t n, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> v(n * 2 * 64);
    for (auto& x : v) x = rng.uniform() < 0.3 ? 1.0 : 0.0;
    out.push_back(Tensor::from({n, 2, 8, 8}, v));
  }
  return out;
}
}  // namespace

TEST_SUITE("model") {
  TEST_CASE("config parsing and validation") {
    CHECK(parse_neuron_kind("staa") == NeuronKind::kStaa);
    CHECK(neuron_kind_name(NeuronKind::kLif) == "lif");
    CHECK_THROWS(parse_neuron_kind("izhikevich"));
    NetworkConfig c;
    c.convs.clear();
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("forward shapes and spike bookkeeping") {
    for (auto kind : {NeuronKind::kLif, NeuronKind::kAdaptive, NeuronKind::kStaa}) {
      NetworkConfig c;
      c.neuron = kind;
      c.init_gain = 6;
      auto net = Network::build(c, 3);
      Rng rng(1);
      ForwardOptions fo;
      fo.record_spikes = true;
      auto r = net.forward(frames(4, 3, rng), fo);
      CHECK(r.logits.shape() == Shape{3, 2});
      CHECK(r.step_logits.size() == 4);
      REQUIRE(r.spikes.size() == 2);
      for (auto& layer : r.spikes)
        for (auto& s : layer)
          for (double v : s.to_vector()) CHECK((v == 0 || v == 1));
      for (std::size_t l = 0; l < 2; ++l) CHECK((r.activity(l) >= 0 && r.activity(l) <= 1));
    }
  }

  TEST_CASE("static input equals repeated frames") {
    NetworkConfig c;
    c.in_channels = 3;
    c.init_gain = 6;
    auto net = Network::build(c, 1);
    Rng rng(2);
    std::vector<double> v(2 * 3 * 64);
    for (auto& x : v) x = rng.uniform();
    auto img = Tensor::from({2, 3, 8, 8}, v);
    auto a = net.forward({img});
    auto b = net.forward({img, img, img, img});
    CHECK(a.logits.to_vector() == b.logits.to_vector());
  }

  TEST_CASE("parameters and profiler views") {
    NetworkConfig c;
    c.neuron = NeuronKind::kStaa;
    auto net = Network::build(c, 1);
    std::size_t total = 0;
    for (auto& [name, p] : net.named_parameters()) total += p.numel();
    CHECK(total == net.parameter_count());
    CHECK(net.named_parameters().front().first == "conv1.weight");
    auto arch = net.arch_spec(false);
    auto trace = net.activity_trace({0.1, 0.2}, false);
    CHECK(trace.activity.size() == arch.layers.size());
    CHECK(arch.layers.back().kind == profiler::LayerKind::kLinear);
  }

  TEST_CASE("TSRD only applies while training") {
    NetworkConfig c;
    c.neuron = NeuronKind::kStaa;
    c.init_gain = 6;
    auto net = Network::build(c, 1);
    Rng rng(3);
    auto f = frames(4, 2, rng);
    tsrd::TsrdConfig all{1.0, 0};
    ForwardOptions fo;
    fo.tsrd = &all;
    auto eval = net.forward(f, fo);
    for (auto& l : eval.bypass)
      for (bool b : l) CHECK_FALSE(b);
    fo.training = true;
    auto tr = net.forward(f, fo);
    for (auto& l : tr.bypass)
      for (bool b : l) CHECK(b);
  }
}
