// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "iwsr/field/grid.hpp"
#include "iwsr/model/layers.hpp"

namespace iwsr::model {

struct HfrbConfig {
  std::size_t in_channels = 4, out_channels = 16;
  std::size_t kernel = 3;
  bool attention = true;
  bool fft = true;
  /// Imaginary spectral conv. Inert when every axis has size <= 2, where the
  /// spectrum of a real input is real.
  bool fft_imag = true;
  std::size_t groups = 0;  // 0: largest divisor of out_channels up to 4
};

/// Residual block: skip(x) + gate(x) * silu(gn(conv(x))) + ifft(conv_re(Re F x), conv_im(Im F x)).
/// The gate is sigmoid of a 1x1x1 conv to one channel. Skip is the identity
/// when the channel counts agree, else a 1x1x1 conv. conv_im has no bias: a
/// constant imaginary spectrum only reaches the discarded imaginary output.
template <class R>
class Hfrb {
 public:
  Hfrb() = default;
  Hfrb(ParamList<R>& params, const std::string& name, const HfrbConfig& cfg, Rng& rng);
  Tensor<R> operator()(const Tensor<R>& x) const;
  const HfrbConfig& config() const { return cfg_; }

  Conv3d<R>& conv() { return conv_; }
  Conv3d<R>& gate() { return gate_; }
  Conv3d<R>& fft_real() { return fft_re_; }
  Conv3d<R>& fft_imag() { return fft_im_; }
  Conv3d<R>& skip() { return skip_; }

 private:
  HfrbConfig cfg_;
  Conv3d<R> conv_, gate_, fft_re_, fft_im_, skip_;
  GroupNorm<R> norm_;
  bool project_ = false;
};

/// Plain conv block used when the residual blocks are ablated away:
/// silu(gn(conv3(x))).
template <class R>
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(ParamList<R>& params, const std::string& name, std::size_t cin, std::size_t cout, Rng& rng);
  Tensor<R> operator()(const Tensor<R>& x) const;

 private:
  Conv3d<R> conv_;
  GroupNorm<R> norm_;
};

enum class BlockKind { hfrb, conv };

struct EncoderConfig {
  std::size_t in_channels = 4;
  std::vector<std::size_t> down{16, 32, 64, 128, 256};
  std::vector<std::size_t> up{128, 64, 32, 16, 32};
  Triple input_size{4, 16, 16};  // (t, z, x)
  bool attention = true;
  bool fft = true;
  BlockKind block = BlockKind::hfrb;
  /// Concatenate the mirrored down-path features before every up block, not
  /// only the last one.
  bool skip_all_levels = false;
  std::uint64_t seed = 0;

  std::size_t out_channels() const { return up.empty() ? 0 : up.back(); }
  /// Number of halving stages (down.size() - 1).
  std::size_t stages() const { return down.size() < 2 ? 0 : down.size() - 1; }
  void validate() const;
};

/// Axes (t, z, x) halved by one downsample stage: those whose size equals
/// the current maximum. Throws ScheduleError when the maximum is 1 or odd.
Triple stage_factors(Triple size);
/// Per-stage factors taking `size` to 1x1x1 in exactly `stages` steps.
/// Throws ConfigError when that is impossible.
std::vector<Triple> down_schedule(Triple size, std::size_t stages);

template <class R> Tensor<R> downsample_stage(const Tensor<R>& x, Triple factors);
template <class R> Tensor<R> upsample_stage(const Tensor<R>& x, Triple factors);

struct StageTrace {
  std::string op;        // "HFRB", "DownSamp", "UpSamp"
  ad::Shape input;       // [C, T, Z, X]
  std::size_t channels;  // output channels, 0 for resampling
};

/// U-Net feature extractor: [in_channels, T, Z, X] -> [out_channels, T, Z, X].
template <class R>
class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg);
  Tensor<R> operator()(const Tensor<R>& x, std::vector<StageTrace>* trace = nullptr) const;

  const EncoderConfig& config() const { return cfg_; }
  ParamList<R>& params() { return params_; }
  const ParamList<R>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }
  /// The residual blocks, in forward order (empty for BlockKind::conv).
  std::vector<Hfrb<R>>& blocks() { return hfrb_; }

 private:
  Tensor<R> block(std::size_t i, const Tensor<R>& x) const;

  EncoderConfig cfg_;
  ParamList<R> params_;
  std::vector<Hfrb<R>> hfrb_;
  std::vector<ConvBlock<R>> conv_;
  std::vector<std::size_t> skip_source_;  // per up block: down-path block index, or npos
};

/// Stacks the four variables of a grid into [4, T, Z, X].
template <class R> Tensor<R> grid_tensor(const field::FieldGrid& grid);

}  // namespace iwsr::model
