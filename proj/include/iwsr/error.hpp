// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace iwsr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or grid shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates its documented range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition (non-scalar loss, empty batch, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Operations applied in the wrong order (normalize before terrain fill).
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// The domain has no fluid cells, or no energy, to work with.
class DegenerateDomainError : public Error {
 public:
  using Error::Error;
};

/// An index or origin lies outside the valid range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Wavelength too short for the grid spacing.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Encoder down/up-sampling schedule cannot be built for the given sizes.
class ScheduleError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint lacks a tensor the current model expects.
class MigrationError : public Error {
 public:
  using Error::Error;
};

/// Training produced a NaN or infinite loss.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(const std::string& what, std::uint64_t batch_seed)
      : Error(what), batch_seed_(batch_seed) {}
  std::uint64_t batch_seed() const noexcept { return batch_seed_; }

 private:
  std::uint64_t batch_seed_;
};

/// Malformed IWSR1 container. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), message_(what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }
  /// Description without the offset suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::uint64_t offset_;
};

}  // namespace iwsr
