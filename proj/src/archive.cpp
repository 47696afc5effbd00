#include "snn/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "snn/io_util.hpp"

namespace snn {

namespace {

constexpr std::string_view kMagic{"SNNARC\r\n", 8};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::string str() {
    const auto n = u32();
    return std::string(take(n));
  }
  std::string_view take(std::size_t n) {
    if (in_.size() - pos_ < n) throw ArchiveError("truncated archive at byte " + std::to_string(pos_));
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t le(int bytes) {
    auto s = take(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

void Archive::set_attr(const std::string& key, const std::string& value) {
  auto it = std::find_if(attrs_.begin(), attrs_.end(), [&](const auto& kv) { return kv.first == key; });
  if (it != attrs_.end()) {
    it->second = value;
  } else {
    attrs_.emplace_back(key, value);
  }
}

std::optional<std::string> Archive::attr(const std::string& key) const {
  for (const auto& [k, v] : attrs_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void Archive::put(const std::string& name, const Tensor& t) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
  if (it != entries_.end()) {
    it->second = t.detach();
  } else {
    entries_.emplace_back(name, t.detach());
  }
}

bool Archive::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

const Tensor& Archive::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ArchiveError("archive has no entry '" + name + "'");
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

std::string Archive::serialize() const {
  Writer w;
  w.raw(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(attrs_.size()));
  for (const auto& [k, v] : attrs_) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    w.str(name);
    w.u8(static_cast<std::uint8_t>(t.dtype()));
    w.u32(static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.shape()) w.u64(d);
    if (t.dtype() == DType::f64) {
      for (double v : t.data<double>()) w.u64(std::bit_cast<std::uint64_t>(v));
    } else {
      for (float v : t.data<float>()) w.u32(std::bit_cast<std::uint32_t>(v));
    }
  }
  return w.take();
}

Archive Archive::parse(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagic.size() || r.take(kMagic.size()) != kMagic) throw ArchiveError("not an snn archive (bad magic)");
  const auto version = r.u32();
  if (version != kVersion) {
    throw ArchiveError("unsupported archive version " + std::to_string(version) + " (expected " +
                       std::to_string(kVersion) + ")");
  }
  Archive a;
  const auto n_attrs = r.u32();
  for (std::uint32_t i = 0; i < n_attrs; ++i) {
    auto k = r.str();
    auto v = r.str();
    a.attrs_.emplace_back(std::move(k), std::move(v));
  }
  const auto n_entries = r.u32();
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    auto name = r.str();
    const auto dt = r.u8();
    if (dt > 1) throw ArchiveError("entry '" + name + "' has unknown dtype code " + std::to_string(dt));
    const auto rank = r.u32();
    if (rank > r.remaining() / 8) throw ArchiveError("truncated or corrupt entry '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = numel(shape);
    if (rank == 0 || n == 0 || n > r.remaining() / (dt == 0 ? 8 : 4)) {
      throw ArchiveError("truncated or corrupt entry '" + name + "'");
    }
    Buffer data;
    if (dt == 0) {
      std::vector<double> v(n);
      for (auto& x : v) x = std::bit_cast<double>(r.u64());
      data = std::move(v);
    } else {
      std::vector<float> v(n);
      for (auto& x : v) x = std::bit_cast<float>(r.u32());
      data = std::move(v);
    }
    a.entries_.emplace_back(std::move(name), Tensor::from_buffer(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw ArchiveError("trailing bytes after archive entries");
  return a;
}

void Archive::save(const std::string& path) const { write_file(path, serialize()); }

Archive Archive::load(const std::string& path) { return parse(read_file(path)); }

}  // namespace snn
