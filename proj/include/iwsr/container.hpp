// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace iwsr {

// IWSR1 container, little-endian:
//   "IWSR" | u8 version (1) | u8 dtype (0 = float32) | u16 tensor count
//   per tensor: u16 name length | name bytes | u8 rank | u64 dims[rank] | payload
inline constexpr std::uint8_t kContainerVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& tensors);
/// Throws FormatError carrying the byte offset of the first bad field.
std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_container(const std::filesystem::path& path);

/// Returns the tensor called `name`, or nullptr.
const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, std::string_view name);

}  // namespace iwsr
