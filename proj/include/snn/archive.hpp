#pragma once

// Portable named-array container used for checkpoints and static image files.
//
// Layout (all integers little-endian):
//   8 bytes   magic "SNNARC\r\n"
//   u32       format version
//   u32       attribute count, then per attribute: u32 len, key, u32 len, value
//   u32       entry count, then per entry:
//               u32 len, name, u8 dtype (0 = float64, 1 = float32),
//               u32 rank, u64 dims[rank], IEEE-754 payload (row-major)
// Entries and attributes keep insertion order, so save -> load -> save is
// byte-identical.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Archive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void set_attr(const std::string& key, const std::string& value);
  std::optional<std::string> attr(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& attrs() const { return attrs_; }

  void put(const std::string& name, const Tensor& t);
  bool contains(const std::string& name) const;
  // Throws ArchiveError when missing.
  const Tensor& get(const std::string& name) const;
  std::vector<std::string> names() const;

  std::string serialize() const;
  static Archive parse(std::string_view bytes);

  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> attrs_;
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace snn
