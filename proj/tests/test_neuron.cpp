#include "doctest.h"
#include "snn/neuron.hpp"
#include "snn/ops.hpp"

using namespace snn;
using namespace snn::neuron;

TEST_SUITE("neuron") {
  TEST_CASE("vanilla LIF integrates, fires and resets") {
    LifParams p;
    auto st = initial_state({1, 1}, p);
    auto r1 = lif_step(st, Tensor::from({1, 1}, {1.5}), p);
    CHECK(r1.state.v.item() == 0.75);
    CHECK(r1.spikes.item() == 0);
    CHECK(r1.state.h.item() == 0.75);
    auto r2 = lif_step(r1.state, Tensor::from({1, 1}, {1.5}), p);
    CHECK(r2.state.v.item() == 1.125);
    CHECK(r2.spikes.item() == 1);
    CHECK(r2.state.h.item() == p.v_reset);
  }

  TEST_CASE("threshold is inclusive") {
    LifParams p;
    auto r = fire(Tensor::from({2}, {1.0, 0.999999}), p);
    CHECK(r.spikes.to_vector() == std::vector<double>{1, 0});
  }

  TEST_CASE("surrogate window") {
    LifParams p;
    CHECK(surrogate_factor(1.0, p) == 1.0);
    CHECK(surrogate_factor(1.4999, p) == 1.0);
    CHECK(surrogate_factor(1.5, p) == 0.0);
    CHECK(surrogate_factor(0.5, p) == 0.0);
    p.a = 0.5;
    CHECK(surrogate_factor(1.2, p) == 2.0);
    auto v = Tensor::from({3}, {0.9, 1.3, 2.0}, DType::f64, true);
    backward(sum(heaviside_surrogate(v, p)));
    CHECK(v.grad()->to_vector() == std::vector<double>{2, 0, 0});
  }

  TEST_CASE("ramp mode matches the surrogate derivative") {
    LifParams p;
    auto s = heaviside_surrogate(Tensor::from({3}, {0.0, 1.0, 3.0}), p, SpikeMode::kRamp);
    CHECK(s.to_vector() == std::vector<double>{0, 0.5, 1});
  }

  TEST_CASE("adaptive with vanilla coefficients equals vanilla") {
    LifParams p;
    p.tau = 3.0;
    auto c = AdaptiveCoeffs::vanilla(2, p);
    auto a = initial_state({1, 2, 1, 1}, p);
    auto b = a;
    for (double in : {0.7, 2.1, -0.3, 3.3}) {
      auto x = Tensor::from({1, 2, 1, 1}, {in, in * 0.5});
      auto ra = lif_step(a, x, p);
      auto rb = adaptive_lif_step(b, x, c, p);
      CHECK(ra.state.v.to_vector() == rb.state.v.to_vector());
      CHECK(ra.spikes.to_vector() == rb.spikes.to_vector());
      a = ra.state;
      b = rb.state;
    }
  }

  TEST_CASE("parameter validation") {
    LifParams p;
    p.tau = 0.0;
    CHECK_THROWS(p.validate());
    p = {};
    p.a = 0;
    CHECK_THROWS(p.validate());
  }
}
