// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "iwsr/container.hpp"
#include "iwsr/model/decoder.hpp"
#include "iwsr/model/encoder.hpp"

namespace iwsr::model {

/// Per-axis affine map from HR-normalised query coordinates to the
/// normalised coordinates of the LR latent grid: s_lat = scale * s + offset.
struct LatentMap {
  std::array<double, 3> scale{1, 1, 1};
  std::array<double, 3> offset{0, 0, 0};

  /// Identity: the latent grid spans the same unit cube as the HR lattice.
  static LatentMap node_aligned() { return {}; }
  /// HR node i sits at LR cell position (i + 0.5) / f - 0.5, so every query
  /// reads the latent at its true location inside the coarse cell.
  static LatentMap cell_aligned(Triple hr_sizes, Triple factors);
};

struct ModelConfig {
  EncoderConfig encoder;
  PcnConfig decoder;
  /// Use LatentMap::cell_aligned rather than node_aligned.
  bool cell_aligned = true;

  /// Encoder ladder sized for an LR block: down widths 16, 32, ... (capped at
  /// 256) for as many stages as the block needs to reach 1x1x1, the up path
  /// mirroring them and ending at 32. Every width is divided by `divisor`.
  /// The decoder reads the encoder's output channels.
  static ModelConfig for_lr_block(Triple lr_block, std::size_t divisor = 1);

  /// ConfigError when the decoder does not read the encoder's channels.
  void validate() const;
};

/// Encoder plus decoder with a shared, prefixed parameter namespace
/// ("encoder.*", "decoder.*").
template <class R>
class SuperResModel {
 public:
  explicit SuperResModel(const ModelConfig& cfg);

  /// [4, T, Z, X] LR block -> latent [C, T, Z, X].
  Tensor<R> encode(const Tensor<R>& lr) const;
  /// Decoder outputs [N, 5] at HR-normalised points [N, 3].
  Tensor<R> decode(const Tensor<R>& latent, const Tensor<R>& points, const LatentMap& map) const;
  LatentMap latent_map(Triple hr_sizes, Triple factors) const;

  const ModelConfig& config() const { return cfg_; }
  Encoder<R>& encoder() { return encoder_; }
  Decoder<R>& decoder() { return decoder_; }
  const Encoder<R>& encoder() const { return encoder_; }
  const Decoder<R>& decoder() const { return decoder_; }

  /// Every trainable tensor with its prefixed name, encoder first.
  std::vector<NamedParam<R>> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  std::vector<NamedTensor> export_state() const;
  /// FormatError on a missing tensor or a shape mismatch.
  void import_state(const std::vector<NamedTensor>& tensors);

 private:
  ModelConfig cfg_;
  Encoder<R> encoder_;
  Decoder<R> decoder_;
};

}  // namespace iwsr::model
