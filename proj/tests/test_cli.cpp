#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "snn/cli.hpp"
#include "snn/io_util.hpp"

using namespace snn;

namespace {
struct Run {
  int code;
  std::string out, err;
};
Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "staa-snn");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}
std::string tmp(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p.string();
}
}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help lists defaults") {
    auto r = run({"train", "--help"});
    CHECK(r.code == 0);
    for (const char* s : {"--alpha TEXT [2]", "--beta TEXT [0.1]", "--r TEXT [4]", "--s TEXT [16]", "--v-th TEXT [1]",
                          "--momentum TEXT [0.9]"})
      CHECK_MESSAGE(r.out.find(s) != std::string::npos, s);
  }

  TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == cli::kExitInvalid);
    CHECK(run({"train", "--no-such-flag"}).code == cli::kExitInvalid);
    auto r = run({"-o", tmp("snn_cli_bad"), "train", "--neuron", "foo"});
    CHECK(r.code == cli::kExitInvalid);
    CHECK(r.err.find("neuron") != std::string::npos);
    CHECK(run({"-o", tmp("snn_cli_bad"), "gradcheck", "--suite", "nope"}).code == cli::kExitInvalid);
    CHECK(run({"-o", tmp("snn_cli_bad"), "eval", "--checkpoint", "/nonexistent.ckpt"}).code == cli::kExitFailure);
  }

  TEST_CASE("train, resume and eval") {
    const auto full = tmp("snn_cli_full"), part = tmp("snn_cli_part");
    const std::vector<std::string> common{"train", "--train-size", "32", "--test-size", "16", "--channels", "4,4",
                                          "--s", "4"};
    auto with_dir = [&](const std::string& dir, std::vector<std::string> extra) {
      std::vector<std::string> a{"-q", "--seed", "3", "-o", dir};
      a.insert(a.end(), common.begin(), common.end());
      a.insert(a.end(), extra.begin(), extra.end());
      return run(a);
    };
    REQUIRE(with_dir(full, {"--epochs", "2"}).code == 0);
    for (const char* f : {"metrics.csv", "summary.json", "manifest.json", "report.json", "report.csv",
                          "checkpoints/last.ckpt"})
      CHECK_MESSAGE(std::filesystem::exists(full + "/" + f), f);
    REQUIRE(with_dir(part, {"--epochs", "1"}).code == 0);
    REQUIRE(with_dir(part, {"--epochs", "2", "--resume", part + "/checkpoints/last.ckpt"}).code == 0);
    CHECK(read_file(part + "/metrics.csv") == read_file(full + "/metrics.csv"));
    auto e = run({"-o", full + "/eval", "--seed", "3", "eval", "--checkpoint", full + "/checkpoints/last.ckpt",
                  "--train-size", "32", "--test-size", "16", "--channels", "4,4", "--s", "4"});
    CHECK(e.code == 0);
    CHECK(e.out.find("accuracy") != std::string::npos);
    std::filesystem::remove_all(full);
    std::filesystem::remove_all(part);
  }

  TEST_CASE("profile prints a report row") {
    const auto dir = tmp("snn_cli_prof");
    std::filesystem::create_directories(dir);
    write_file(dir + "/a.json",
               R"({"name":"toy","timesteps":4,"layers":[{"kind":"other","macs":6e7,"spiking_input":false},)"
               R"({"kind":"other","macs":3.75e8}]})");
    write_file(dir + "/a.csv", "layer,activity\n2,0.0666666667\n");
    auto r = run({"-o", dir, "profile", "--arch", dir + "/a.json", "--trace", dir + "/a.csv", "--format", "table"});
    CHECK(r.code == 0);
    CHECK(r.out.find("0.366") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("synth-data writes a manifest") {
    const auto dir = tmp("snn_cli_synth");
    CHECK(run({"-q", "-o", dir, "synth-data", "--n", "4"}).code == 0);
    CHECK(std::filesystem::exists(dir + "/train.json"));
    std::filesystem::remove_all(dir);
  }
}
