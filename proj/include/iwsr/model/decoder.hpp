// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "iwsr/model/layers.hpp"

namespace iwsr::model {

/// Output channels of the decoder: four physical variables plus an
/// auxiliary non-dimensional pressure.
inline constexpr std::size_t kDecoderOutputs = 5;
inline constexpr std::size_t kPressureChannel = 4;

struct PcnConfig {
  std::size_t latent_channels = 32;
  std::size_t depth = 6;
  std::size_t width = 128;
  bool zero_head = false;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Coordinate-conditioned residual MLP. Layer 0 maps [latent, p] to the
/// width; every later layer maps [h, p] and adds its silu output to h.
template <class R>
class Decoder {
 public:
  explicit Decoder(const PcnConfig& cfg);

  /// Features [N, latent] and points [N, 3] -> [N, 5].
  Tensor<R> forward_features(const Tensor<R>& features, const Tensor<R>& points) const;
  /// Trilinear lookup in latent [C, T, Z, X] followed by the MLP. Throws
  /// ContractError on an empty batch.
  Tensor<R> operator()(const Tensor<R>& latent, const Tensor<R>& points) const;

  const PcnConfig& config() const { return cfg_; }
  ParamList<R>& params() { return params_; }
  const ParamList<R>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

 private:
  PcnConfig cfg_;
  ParamList<R> params_;
  std::vector<Linear<R>> layers_;
  Linear<R> head_;
};

/// Trilinear lookup of latent [C, T, Z, X] at points [N, 3] -> [N, C].
template <class R> Tensor<R> interpolate_latent(const Tensor<R>& latent, const Tensor<R>& points);

}  // namespace iwsr::model
