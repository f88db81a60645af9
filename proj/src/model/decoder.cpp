// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/model/decoder.hpp"

#include "iwsr/error.hpp"

namespace iwsr::model {

void PcnConfig::validate() const {
  if (depth < 1) throw ConfigError("decoder depth must be >= 1");
  if (width < 8) throw ConfigError("decoder width must be >= 8");
  if (latent_channels < 1) throw ConfigError("decoder latent channels must be >= 1");
}

template <class R>
Decoder<R>::Decoder(const PcnConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::size_t in = (i == 0 ? cfg.latent_channels : cfg.width) + 3;
    layers_.emplace_back(params_, "layer" + std::to_string(i), in, cfg.width, rng);
  }
  head_ = Linear<R>(params_, "head", cfg.width, kDecoderOutputs, rng);
  if (cfg.zero_head) head_.zero();
}

template <class R>
Tensor<R> Decoder<R>::forward_features(const Tensor<R>& features, const Tensor<R>& points) const {
  if (features.rank() != 2 || features.dim(1) != cfg_.latent_channels || points.rank() != 2 || points.dim(1) != 3 ||
      points.dim(0) != features.dim(0)) {
    throw DimensionError("decoder expects features [N, " + std::to_string(cfg_.latent_channels) +
                         "] and points [N, 3], got " + ad::to_string(features.shape()) + " and " +
                         ad::to_string(points.shape()));
  }
  Tensor<R> h = ad::silu(layers_[0](ad::concat<R>({features, points}, 1)));
  for (std::size_t i = 1; i < layers_.size(); ++i) h = ad::add(h, ad::silu(layers_[i](ad::concat<R>({h, points}, 1))));
  return head_(h);
}

template <class R>
Tensor<R> Decoder<R>::operator()(const Tensor<R>& latent, const Tensor<R>& points) const {
  if (points.rank() != 2 || points.dim(0) == 0) throw ContractError("decoder query batch is empty");
  return forward_features(interpolate_latent(latent, points), points);
}

template <class R>
Tensor<R> interpolate_latent(const Tensor<R>& latent, const Tensor<R>& points) {
  return ad::trilinear_sample(latent, points);
}

template class Decoder<float>;
template class Decoder<double>;
template Tensor<float> interpolate_latent(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> interpolate_latent(const Tensor<double>&, const Tensor<double>&);

}  // namespace iwsr::model
