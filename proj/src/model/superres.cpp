// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/model/superres.hpp"

#include <algorithm>

#include "iwsr/error.hpp"

namespace iwsr::model {

LatentMap LatentMap::cell_aligned(Triple hr_sizes, Triple factors) {
  LatentMap m;
  for (int a = 0; a < 3; ++a) {
    const double n_hr = static_cast<double>(hr_sizes[a]);
    const double f = static_cast<double>(factors[a]);
    const double n_lr = static_cast<double>(hr_sizes[a] / factors[a]);
    if (n_lr <= 1.0) {
      m.scale[a] = 0.0;
      m.offset[a] = 0.0;
      continue;
    }
    // lattice index i = s (n_hr - 1); LR position (i + 0.5) / f - 0.5; s_lat = pos / (n_lr - 1).
    m.scale[a] = (n_hr - 1.0) / (f * (n_lr - 1.0));
    m.offset[a] = (0.5 / f - 0.5) / (n_lr - 1.0);
  }
  return m;
}

ModelConfig ModelConfig::for_lr_block(Triple lr_block, std::size_t divisor) {
  if (divisor == 0) throw ConfigError("ladder divisor must be >= 1");
  std::size_t stages = 0;
  for (Triple s = lr_block; s != Triple{1, 1, 1}; ++stages) {
    const Triple f = stage_factors(s);
    for (int a = 0; a < 3; ++a) s[a] /= f[a];
  }
  if (stages == 0) throw ConfigError("an LR block of 1x1x1 leaves nothing to encode");
  auto width = [&](std::size_t c) { return std::max<std::size_t>(1, c / divisor); };
  ModelConfig cfg;
  cfg.encoder.input_size = lr_block;
  cfg.encoder.down.clear();
  cfg.encoder.up.clear();
  for (std::size_t i = 0; i <= stages; ++i) cfg.encoder.down.push_back(width(std::min<std::size_t>(256, 16u << i)));
  for (std::size_t j = 0; j + 1 <= stages; ++j) cfg.encoder.up.push_back(cfg.encoder.down[stages - 1 - j]);
  cfg.encoder.up.push_back(width(32));
  cfg.decoder.latent_channels = cfg.encoder.out_channels();
  return cfg;
}

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (decoder.latent_channels != encoder.out_channels()) {
    throw ConfigError("decoder reads " + std::to_string(decoder.latent_channels) + " latent channels, encoder emits " +
                      std::to_string(encoder.out_channels()));
  }
}

template <class R>
SuperResModel<R>::SuperResModel(const ModelConfig& cfg)
    : cfg_((cfg.validate(), cfg)), encoder_(cfg.encoder), decoder_(cfg.decoder) {}

template <class R>
Tensor<R> SuperResModel<R>::encode(const Tensor<R>& lr) const {
  return encoder_(lr);
}

template <class R>
LatentMap SuperResModel<R>::latent_map(Triple hr_sizes, Triple factors) const {
  return cfg_.cell_aligned ? LatentMap::cell_aligned(hr_sizes, factors) : LatentMap::node_aligned();
}

template <class R>
Tensor<R> SuperResModel<R>::decode(const Tensor<R>& latent, const Tensor<R>& points, const LatentMap& map) const {
  if (points.rank() != 2 || points.dim(0) == 0) throw ContractError("decoder query batch is empty");
  Tensor<R> q = points;
  if (map.scale != std::array<double, 3>{1, 1, 1} || map.offset != std::array<double, 3>{0, 0, 0}) {
    const Tensor<R> a({3}, {R(map.scale[0]), R(map.scale[1]), R(map.scale[2])});
    const Tensor<R> b({3}, {R(map.offset[0]), R(map.offset[1]), R(map.offset[2])});
    q = ad::add(ad::mul(points, a), b);
  }
  return decoder_.forward_features(interpolate_latent(latent, q), points);
}

template <class R>
std::vector<NamedParam<R>> SuperResModel<R>::parameters() const {
  std::vector<NamedParam<R>> out;
  for (const auto& p : encoder_.params().items()) out.push_back({"encoder." + p.name, p.value});
  for (const auto& p : decoder_.params().items()) out.push_back({"decoder." + p.name, p.value});
  return out;
}

template <class R>
std::size_t SuperResModel<R>::parameter_count() const {
  return encoder_.parameter_count() + decoder_.parameter_count();
}

template <class R>
void SuperResModel<R>::zero_grad() {
  encoder_.params().zero_grad();
  decoder_.params().zero_grad();
}

template <class R>
std::vector<NamedTensor> SuperResModel<R>::export_state() const {
  std::vector<NamedTensor> out = encoder_.params().export_state("encoder.");
  std::vector<NamedTensor> dec = decoder_.params().export_state("decoder.");
  out.insert(out.end(), std::make_move_iterator(dec.begin()), std::make_move_iterator(dec.end()));
  return out;
}

template <class R>
void SuperResModel<R>::import_state(const std::vector<NamedTensor>& tensors) {
  encoder_.params().import_state(tensors, "encoder.");
  decoder_.params().import_state(tensors, "decoder.");
}

template class SuperResModel<float>;
template class SuperResModel<double>;

}  // namespace iwsr::model
