#include <filesystem>

#include "doctest.h"
#include "snn/archive.hpp"

using namespace snn;

TEST_SUITE("archive") {
  TEST_CASE("round trip is byte identical") {
    Archive a;
    a.set_attr("format", "x");
    a.put("w", Tensor::from({2, 2}, {1, 2, 3, 0.1}));
    a.put("f", Tensor::from({3}, {1, 2.5, -3}, DType::f32));
    const auto bytes = a.serialize();
    auto b = Archive::parse(bytes);
    CHECK(b.serialize() == bytes);
    CHECK(b.attr("format") == std::optional<std::string>("x"));
    CHECK(b.get("w").to_vector() == a.get("w").to_vector());
    CHECK(b.get("f").dtype() == DType::f32);
    CHECK(b.names() == std::vector<std::string>{"w", "f"});
    CHECK_THROWS_AS(b.get("missing"), ArchiveError);
  }

  TEST_CASE("corrupt input is rejected") {
    Archive a;
    a.put("w", Tensor::from({2}, {1, 2}));
    auto bytes = a.serialize();
    CHECK_THROWS_AS(Archive::parse(bytes.substr(0, bytes.size() - 3)), ArchiveError);
    CHECK_THROWS_AS(Archive::parse("garbage"), ArchiveError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(Archive::parse(bytes), ArchiveError);
  }

  TEST_CASE("files") {
    auto path = (std::filesystem::temp_directory_path() / "snn_archive_test.bin").string();
    Archive a;
    a.put("x", Tensor::scalar(4));
    a.save(path);
    CHECK(Archive::load(path).get("x").item() == 4);
    std::filesystem::remove(path);
    CHECK_THROWS(Archive::load(path));
  }
}
