#include "doctest.h"
#include "snn/tsrd.hpp"

using namespace snn;

TEST_SUITE("tsrd") {
  TEST_CASE("masks are keyed, not sequenced") {
    tsrd::TsrdConfig c{0.5, 7};
    auto a = tsrd::sample_mask(c, 8, 3, 1, 2);
    auto b = tsrd::sample_mask(c, 8, 3, 1, 2);
    CHECK(a == b);
    for (std::size_t t = 0; t < 8; ++t) CHECK(a[t] == tsrd::bypass_bit(c, 3, 2, 1, t));
    tsrd::TsrdConfig d{0.5, 8};
    bool differs = false;
    for (std::uint64_t e = 0; e < 10; ++e) differs = differs || tsrd::sample_mask(d, 8, e, 1) != tsrd::sample_mask(c, 8, e, 1);
    CHECK(differs);
  }

  TEST_CASE("extremes") {
    tsrd::TsrdConfig never{0.0, 1}, always{1.0, 1};
    for (std::size_t t = 0; t < 50; ++t) {
      CHECK_FALSE(tsrd::bypass_bit(never, 0, 0, 0, t));
      CHECK(tsrd::bypass_bit(always, 0, 0, 0, t));
    }
    tsrd::TsrdConfig bad{1.5, 0};
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("bypass uses the plain aggregation") {
    Rng rng(1);
    neuron::LifParams lif;
    staa::StaaOptions opt;
    opt.r = opt.s = 2;
    auto p = staa::StaaParams::init(4, 2, opt, lif, rng);
    auto x = Tensor::full({1, 4, 2, 2}, 0.3);
    auto h = Tensor::full({1, 4, 2, 2}, 0.2);
    auto v = tsrd::aggregate(x, h, p, 0, true);
    CHECK(v.to_vector() == neuron::adaptive_integrate(h, x, p.coeffs).to_vector());
    CHECK(tsrd::aggregate(x, h, p, 0, false).to_vector() == staa::attend(x, h, p, 0).to_vector());
  }
}
