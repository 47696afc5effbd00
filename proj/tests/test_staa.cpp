#include "doctest.h"
#include "snn/ops.hpp"
#include "snn/staa.hpp"

using namespace snn;
using namespace snn::staa;

namespace {
Tensor rand_t(const Shape& s, Rng& rng) {
  std::vector<double> v(numel(s));
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor::from(s, v);
}
}  // namespace

TEST_SUITE("staa") {
  TEST_CASE("GC shapes and parameter count") {
    Rng rng(1);
    auto p = GcParams::init(8, 4, rng, DType::f64, false);
    CHECK(p.conv_q_w.shape() == Shape{2, 8, 1, 1});
    CHECK(p.conv_v_w.shape() == Shape{8, 2, 1, 1});
    CHECK(p.parameter_count() == gc_parameter_count(8, 4));
    CHECK_THROWS_AS(GcParams::init(6, 4, rng), std::invalid_argument);
    auto x = rand_t({2, 8, 3, 3}, rng);
    CHECK(gc_forward(x, p).shape() == x.shape());
  }

  TEST_CASE("GC starts as the identity") {
    Rng rng(2);
    auto p = GcParams::init(8, 2, rng);
    auto x = rand_t({1, 8, 2, 2}, rng);
    CHECK(gc_forward(x, p).to_vector() == x.to_vector());
  }

  TEST_CASE("GC context is shared over positions") {
    Rng rng(3);
    auto p = GcParams::init(4, 2, rng, DType::f64, false);
    auto x = Tensor::zeros({1, 4, 2, 2});
    auto y = gc_forward(x, p).to_vector();
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 1; i < 4; ++i) CHECK(y[c * 4 + i] == y[c * 4]);
  }

  TEST_CASE("PE adds a per-step channel offset") {
    auto table = PeTable::init(3, 2);
    table.pos.mutable_data<double>()[2 * 1 + 1] = 0.5;
    auto x = Tensor::zeros({1, 2, 1, 2});
    CHECK(pe_apply(x, table, 1).to_vector() == std::vector<double>{0, 0, 0.5, 0.5});
    CHECK(pe_apply(x, table, 0).to_vector() == x.to_vector());
    CHECK_THROWS(pe_apply(x, table, 3));
  }

  TEST_CASE("SA gate range and initial bias") {
    Rng rng(4);
    auto p = SaParams::init(16, 4, 2.0, rng, DType::f64, 3.0);
    auto u = rand_t({2, 16, 3, 3}, rng);
    auto g = sa_gate(u, p).to_vector();
    for (double v : g) {
      CHECK(v > 0);
      CHECK(v < 1);
    }
    CHECK(sa_forward(u, p).shape() == u.shape());
    CHECK_THROWS(SaParams::init(16, 5, 2.0, rng));
  }

  TEST_CASE("disabled blocks reduce to adaptive LIF") {
    Rng rng(5);
    StaaOptions opt;
    opt.r = opt.s = 2;
    opt.blocks = {false, false, false};
    neuron::LifParams lif;
    auto p = StaaParams::init(4, 2, opt, lif, rng);
    auto x = rand_t({1, 4, 2, 2}, rng);
    auto h = rand_t({1, 4, 2, 2}, rng);
    auto v = attend(x, h, p, 0);
    auto ref = neuron::adaptive_integrate(h, x, p.coeffs);
    CHECK(v.to_vector() == ref.to_vector());
  }

  TEST_CASE("STAA step produces binary spikes") {
    Rng rng(6);
    neuron::LifParams lif;
    auto p = StaaParams::init(16, 2, {}, lif, rng);
    auto st = neuron::initial_state({2, 16, 3, 3}, lif);
    for (std::size_t t = 0; t < 2; ++t) {
      auto r = staa_lif_step(mul_scalar(rand_t({2, 16, 3, 3}, rng), 3), st, p, lif, t);
      for (double s : r.spikes.to_vector()) CHECK((s == 0 || s == 1));
      st = r.state;
    }
    auto names = p.named_parameters("l1.");
    CHECK(names.size() > 10);
  }
}
