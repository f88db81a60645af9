// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/model/layers.hpp"

#include <algorithm>
#include <cmath>

#include "iwsr/error.hpp"

namespace iwsr::model {

template <class R>
Tensor<R> ParamList<R>::add(std::string name, Shape shape) {
  Tensor<R> t(std::move(shape));
  t.set_requires_grad(true);
  items_.push_back({std::move(name), t});
  return t;
}

template <class R>
std::size_t ParamList<R>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.value.numel();
  return n;
}

template <class R>
void ParamList<R>::zero_grad() {
  for (auto& p : items_) p.value.zero_grad();
}

template <class R>
std::vector<NamedTensor> ParamList<R>::export_state(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  out.reserve(items_.size());
  for (const auto& p : items_) {
    NamedTensor t{prefix + p.name, {p.value.shape().begin(), p.value.shape().end()}, {}};
    t.data.assign(p.value.data().begin(), p.value.data().end());
    out.push_back(std::move(t));
  }
  return out;
}

template <class R>
void ParamList<R>::import_state(const std::vector<NamedTensor>& tensors, const std::string& prefix) {
  for (auto& p : items_) {
    const NamedTensor* t = find_tensor(tensors, prefix + p.name);
    if (!t) throw FormatError("missing parameter tensor \"" + prefix + p.name + "\"", 0);
    const std::vector<std::uint64_t> want(p.value.shape().begin(), p.value.shape().end());
    if (t->dims != want) {
      throw FormatError("parameter \"" + prefix + p.name + "\" has shape " +
                            ad::to_string(Shape(t->dims.begin(), t->dims.end())) + ", model expects " +
                            ad::to_string(p.value.shape()),
                        0);
    }
    Tensor<R> v = p.value;
    std::transform(t->data.begin(), t->data.end(), v.data().begin(), [](float f) { return static_cast<R>(f); });
  }
}

template <class R>
void uniform_init(Tensor<R>& t, Rng& rng, double bound) {
  for (R& v : t.data()) v = static_cast<R>((2.0 * uniform01(rng) - 1.0) * bound);
}

template <class R>
Conv3d<R>::Conv3d(ParamList<R>& params, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
                  Rng& rng, bool with_bias)
    : k_(k) {
  if (cin == 0 || cout == 0 || k == 0 || k % 2 == 0) throw ConfigError("conv " + name + ": invalid channels or kernel");
  weight_ = params.add(name + ".weight", {cout, cin, k, k, k});
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k * k));
  uniform_init(weight_, rng, bound);
  if (with_bias) {
    bias_ = params.add(name + ".bias", {cout});
    uniform_init(bias_, rng, bound);
  }
}

template <class R>
Tensor<R> Conv3d<R>::operator()(const Tensor<R>& x) const {
  ad::Conv3dOptions o;
  o.padding = {k_ / 2, k_ / 2, k_ / 2};
  return ad::conv3d(x, weight_, bias_, o);
}

template <class R>
void Conv3d<R>::zero() {
  std::fill(weight_.data().begin(), weight_.data().end(), R(0));
  if (bias_.defined()) std::fill(bias_.data().begin(), bias_.data().end(), R(0));
}

template <class R>
Linear<R>::Linear(ParamList<R>& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw ConfigError("linear " + name + ": sizes must be positive");
  weight_ = params.add(name + ".weight", {in, out});
  bias_ = params.add(name + ".bias", {out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  uniform_init(weight_, rng, bound);
  uniform_init(bias_, rng, bound);
}

template <class R>
Tensor<R> Linear<R>::operator()(const Tensor<R>& x) const {
  return ad::add(ad::matmul(x, weight_), bias_);
}

template <class R>
void Linear<R>::zero() {
  std::fill(weight_.data().begin(), weight_.data().end(), R(0));
  std::fill(bias_.data().begin(), bias_.data().end(), R(0));
}

template <class R>
GroupNorm<R>::GroupNorm(ParamList<R>& params, const std::string& name, std::size_t channels, std::size_t groups)
    : groups_(groups) {
  if (groups == 0 || channels % groups != 0) {
    throw ConfigError("group norm " + name + ": " + std::to_string(channels) + " channels not divisible into " +
                      std::to_string(groups) + " groups");
  }
  gamma_ = params.add(name + ".gamma", {channels});
  beta_ = params.add(name + ".beta", {channels});
  std::fill(gamma_.data().begin(), gamma_.data().end(), R(1));
}

template <class R>
Tensor<R> GroupNorm<R>::operator()(const Tensor<R>& x) const {
  return ad::group_norm(x, groups_, gamma_, beta_);
}

template class ParamList<float>;
template class ParamList<double>;
template void uniform_init(Tensor<float>&, Rng&, double);
template void uniform_init(Tensor<double>&, Rng&, double);
template class Conv3d<float>;
template class Conv3d<double>;
template class Linear<float>;
template class Linear<double>;
template class GroupNorm<float>;
template class GroupNorm<double>;

}  // namespace iwsr::model
