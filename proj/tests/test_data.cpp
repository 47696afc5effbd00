#include <filesystem>
#include <set>

#include "doctest.h"
#include "snn/data.hpp"
#include "snn/ops.hpp"

using namespace snn;
using namespace snn::data;

TEST_SUITE("data") {
  TEST_CASE("event parsing") {
    auto s = parse_events("# demo\n4 4\n30 1 2 1\n10 0 0 0\n");
    CHECK(s.height == 4);
    REQUIRE(s.events.size() == 2);
    CHECK(s.events[0].t_us == 10);
    CHECK(parse_events(format_events(s)).events == s.events);
    CHECK_THROWS(parse_events("4 4\n10 9 0 1\n"));
    CHECK_THROWS(parse_events("4 4\n10 0 0 2\n"));
    CHECK_THROWS(parse_events("4 4\n10 0\n"));
  }

  TEST_CASE("binning conserves events") {
    EventStream s{3, 3, {}};
    for (int i = 0; i < 100; ++i) s.events.push_back({static_cast<std::uint64_t>(i * 37), static_cast<std::uint32_t>(i % 3), static_cast<std::uint32_t>((i / 3) % 3), static_cast<std::uint8_t>(i % 2)});
    auto f = bin_events(s, 4);
    CHECK(f.shape() == Shape{4, 2, 3, 3});
    CHECK(sum(f).item() == 100);
    CHECK(f.at({0, 0, 0, 0}) >= 1);
    EventStream one{2, 2, {{5, 1, 1, 1}}};
    CHECK(sum(bin_events(one, 3)).item() == 1);
    EventStream empty{2, 2, {}};
    CHECK(sum(bin_events(empty, 3)).item() == 0);
  }

  TEST_CASE("geometric transforms") {
    auto img = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    CHECK(hflip(img).to_vector() == std::vector<double>{2, 1, 4, 3});
    CHECK(translate(img, 0, 1).to_vector() == std::vector<double>{0, 1, 0, 3});
    CHECK(pad_crop(img, 1, 1, 1).to_vector() == img.to_vector());
    CHECK(pad_crop(img, 1, 0, 0).to_vector() == std::vector<double>{0, 0, 0, 1});
    CHECK(rotate(img, 0).to_vector() == img.to_vector());
    CHECK(cutout(img, 0, 0, 1).to_vector() == std::vector<double>{0, 2, 3, 4});
    CHECK(erase(img, 1, 0, 1, 2).to_vector() == std::vector<double>{1, 2, 0, 0});
    CHECK(adjust_contrast(img, 1.0).to_vector() == img.to_vector());
    CHECK_THROWS(make_policy({"shear-x"}));
  }

  TEST_CASE("augmentation keeps shape and is seed driven") {
    auto img = Tensor::full({3, 8, 8}, 0.5);
    Rng a(3), b(3);
    auto pol = make_policy({"crop", "hflip", "cutout", "contrast", "rotate", "translate"});
    CHECK(augment_static(img, a, pol).to_vector() == augment_static(img, b, pol).to_vector());
    auto frames = Tensor::full({4, 2, 8, 8}, 1.0);
    Rng c(1);
    CHECK(augment_event_frames(frames, c).shape() == frames.shape());
  }

  TEST_CASE("mixup labels") {
    auto a = Tensor::ones({1, 1, 2, 2});
    auto b = Tensor::zeros({1, 1, 2, 2});
    auto m = mixup({a, 0}, {b, 2}, 0.25, 3);
    CHECK(m.soft_label == std::vector<double>{0.25, 0, 0.75});
    CHECK(m.frames.at({0, 0, 0, 0}) == 0.25);
  }

  TEST_CASE("synthetic datasets") {
    auto ds = synth_dataset(SynthKind::kMovingBar, 16, 1);
    CHECK(ds.size() == 16);
    CHECK(ds.num_classes == 2);
    CHECK(ds.samples[0].frames.shape() == Shape{4, 2, 8, 8});
    REQUIRE(ds.samples[0].events);
    CHECK(sum(ds.samples[0].frames).item() == static_cast<double>(ds.samples[0].events->events.size()));
    std::set<std::size_t> labels;
    for (auto& s : ds.samples) labels.insert(s.label);
    CHECK(labels.size() == 2);
    auto again = synth_dataset(SynthKind::kMovingBar, 16, 1);
    CHECK(again.samples[5].frames.to_vector() == ds.samples[5].frames.to_vector());
    auto tex = synth_dataset(SynthKind::kTextures, 4, 2);
    CHECK(tex.timesteps == 1);
    CHECK(tex.channels == 3);
    CHECK(parse_synth_kind(synth_kind_name(SynthKind::kParityBlobs)) == SynthKind::kParityBlobs);
  }

  TEST_CASE("manifest round trip") {
    auto dir = (std::filesystem::temp_directory_path() / "snn_manifest_test").string();
    std::filesystem::remove_all(dir);
    auto ds = synth_dataset(SynthKind::kMovingBar, 4, 9);
    write_manifest(dir, ds, "train");
    auto back = load_manifest(dir + "/train.json", 4);
    REQUIRE(back.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(back.samples[i].label == ds.samples[i].label);
      CHECK(back.samples[i].frames.to_vector() == ds.samples[i].frames.to_vector());
    }
    auto tex = synth_dataset(SynthKind::kTextures, 2, 9);
    write_manifest(dir, tex, "img");
    CHECK(load_manifest(dir + "/img.json", 4).samples[1].frames.to_vector() == tex.samples[1].frames.to_vector());
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("batching") {
    auto ds = synth_dataset(SynthKind::kMovingBar, 4, 1);
    auto b = make_batch(ds, {0, 2}, DType::f64);
    REQUIRE(b.size() == 4);
    CHECK(b[0].shape() == Shape{2, 2, 8, 8});
  }
}
