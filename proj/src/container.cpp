// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "iwsr/error.hpp"

namespace iwsr {
namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) {
      throw FormatError(std::string("truncated container while reading ") + what, pos_);
    }
  }

  std::size_t pos() const { return pos_; }
  const std::uint8_t* here() const { return b_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& tensors) {
  if (tensors.size() > 0xFFFF) throw ContractError("too many tensors for one container");
  std::vector<std::uint8_t> out = {'I', 'W', 'S', 'R', kContainerVersion, 0};
  put<std::uint16_t>(out, static_cast<std::uint16_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF) throw ContractError("tensor name too long: " + t.name.substr(0, 32));
    if (t.dims.size() > 0xFF) throw ContractError("tensor rank too large: " + t.name);
    std::uint64_t n = 1;
    for (auto d : t.dims) n *= d;
    if (n != t.data.size()) {
      throw DimensionError("tensor " + t.name + " has " + std::to_string(t.data.size()) + " values for " +
                           std::to_string(n) + " elements");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    for (float f : t.data) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(r.here(), "IWSR", 4) != 0) throw FormatError("bad magic, expected \"IWSR\"", 0);
  r.skip(4);
  const std::size_t vpos = r.pos();
  const auto version = r.get<std::uint8_t>("version");
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version), vpos);
  }
  const std::size_t dpos = r.pos();
  const auto dtype = r.get<std::uint8_t>("dtype");
  if (dtype != 0) throw FormatError("unsupported dtype code " + std::to_string(dtype), dpos);
  const auto count = r.get<std::uint16_t>("tensor count");

  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint16_t k = 0; k < count; ++k) {
    NamedTensor t;
    const auto len = r.get<std::uint16_t>("name length");
    r.need(len, "tensor name");
    t.name.assign(reinterpret_cast<const char*>(r.here()), len);
    r.skip(len);
    const auto rank = r.get<std::uint8_t>("rank");
    std::uint64_t n = 1;
    for (std::uint8_t a = 0; a < rank; ++a) {
      const std::size_t at = r.pos();
      const auto d = r.get<std::uint64_t>("dimension");
      if (d != 0 && n > (bytes.size() / 4) / d) throw FormatError("tensor " + t.name + " is larger than the file", at);
      n *= d;
      t.dims.push_back(d);
    }
    r.need(n * 4, "tensor payload");
    t.data.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(r.get<std::uint32_t>("payload"));
    out.push_back(std::move(t));
  }
  if (r.pos() != bytes.size()) throw FormatError("trailing bytes after last tensor", r.pos());
  return out;
}

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const auto bytes = encode_container(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing " + path.string());
}

std::vector<NamedTensor> read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, std::string_view name) {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

}  // namespace iwsr
