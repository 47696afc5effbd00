#include <cmath>
#include <limits>

#include "doctest.h"
#include "snn/profiler.hpp"

using namespace snn::profiler;

TEST_SUITE("profiler") {
  TEST_CASE("energy formula") {
    CHECK(energy(0.10, 0.06) == doctest::Approx(0.366).epsilon(1e-12));
    CHECK(energy(1.50, 0.04) == doctest::Approx(1.534).epsilon(1e-12));
    CHECK(energy(0.05, 0.28) == doctest::Approx(1.333).epsilon(1e-12));
    CHECK(energy(0.2, 0.06) > energy(0.1, 0.06));
    CHECK(energy(0.1, 0.07) > energy(0.1, 0.06));
    CHECK(energy_ann(1.0) == doctest::Approx(4.6));
  }

  TEST_CASE("layer MACs and params") {
    LayerSpec conv;
    conv.in_channels = 3;
    conv.out_channels = 8;
    conv.kernel_h = conv.kernel_w = 3;
    conv.padding = 1;
    conv.in_h = conv.in_w = 32;
    CHECK(layer_macs(conv) == 32.0 * 32 * 8 * 27);
    CHECK(layer_params(conv) == 8 * 27 + 8);
    LayerSpec fc;
    fc.kind = LayerKind::kLinear;
    fc.in_channels = 10;
    fc.out_channels = 5;
    fc.bias = false;
    CHECK(layer_macs(fc) == 50);
    CHECK(layer_params(fc) == 50);
  }

  TEST_CASE("first layer is charged as MACs") {
    ArchSpec spec;
    spec.timesteps = 4;
    LayerSpec a;
    a.kind = LayerKind::kLinear;
    a.in_channels = 10;
    a.out_channels = 10;
    spec.layers = {a, a};
    CHECK_FALSE(receives_spikes(spec, 0));
    CHECK(receives_spikes(spec, 1));
    ActivityTrace tr{{std::numeric_limits<double>::quiet_NaN(), 0.5}, 4};
    CHECK(count_encoding_macs(spec) == 100);
    CHECK(count_acs(spec, tr) == 100 * 0.5 * 4);
    ActivityTrace bad{{0.1, 1.5}, 4};
    CHECK_THROWS(count_acs(spec, bad));
  }

  TEST_CASE("arch and report round trips") {
    ArchSpec spec;
    spec.name = "tiny";
    spec.timesteps = 2;
    LayerSpec enc;
    enc.kind = LayerKind::kOther;
    enc.macs = 1e6;
    enc.params = 10;
    enc.spiking_input = 0;
    LayerSpec body = enc;
    body.spiking_input = 1;
    body.macs = 4e6;
    spec.layers = {enc, body};
    auto back = arch_from_json(arch_to_json(spec));
    CHECK(arch_to_json(back) == arch_to_json(spec));
    auto r = build_report(spec, ActivityTrace{{0, 0.25}, 2});
    CHECK(r.acs_g == doctest::Approx(0.002));
    CHECK(r.macs_g == doctest::Approx(0.001));
    CHECK(parse_report_json(emit_report(r, ReportFormat::kJson)) == r);
    CHECK(emit_report(r, ReportFormat::kCsv).rfind(kCsvHeader, 0) == 0);
    CHECK_THROWS(parse_format("xml"));
    auto tr = trace_from_csv("layer,activity\n2,0.25\n", 2);
    CHECK(tr.activity.size() == 2);
    CHECK(std::isnan(tr.activity[0]));
    CHECK(trace_from_csv(trace_to_csv(tr), 2).activity[1] == 0.25);
  }
}
