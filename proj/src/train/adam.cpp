// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/train/adam.hpp"

#include <cmath>

#include "iwsr/error.hpp"

namespace iwsr::train {

using ad::Tensor;

template <class R>
void adam_step(const std::vector<model::NamedParam<R>>& params, AdamState& state, double lr, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("Adam state holds " + std::to_string(state.m.size()) + " moments for " +
                         std::to_string(params.size()) + " parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<R> w = params[k].value;
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != w.numel() || v.size() != w.numel()) {
      throw DimensionError("Adam moments for '" + params[k].name + "' do not match its " +
                           std::to_string(w.numel()) + " values");
    }
    const bool has = w.has_grad();
    const auto g = w.grad();
    auto data = w.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double gi = has ? static_cast<double>(g[i]) : 0.0;
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      data[i] = static_cast<R>(static_cast<double>(data[i]) - lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

template <class R>
std::vector<NamedTensor> AdamState::export_state(const std::vector<model::NamedParam<R>>& params) const {
  std::vector<NamedTensor> out;
  for (const char* kind : {"m", "v"}) {
    const auto& src = kind[0] == 'm' ? m : v;
    for (std::size_t k = 0; k < params.size(); ++k) {
      NamedTensor t;
      t.name = std::string("adam.") + kind + "." + params[k].name;
      t.dims.assign(params[k].value.shape().begin(), params[k].value.shape().end());
      t.data = src[k];
      out.push_back(std::move(t));
    }
  }
  return out;
}

template <class R>
AdamState AdamState::import_state(const std::vector<NamedTensor>& tensors,
                                  const std::vector<model::NamedParam<R>>& params, std::uint64_t step) {
  AdamState s;
  s.step = step;
  for (const char* kind : {"m", "v"}) {
    auto& dst = kind[0] == 'm' ? s.m : s.v;
    for (const auto& p : params) {
      const std::string name = std::string("adam.") + kind + "." + p.name;
      const NamedTensor* t = find_tensor(tensors, name);
      if (!t) throw MigrationError("checkpoint lacks optimizer tensor '" + name + "'");
      if (t->data.size() != p.value.numel()) {
        throw MigrationError("optimizer tensor '" + name + "' holds " + std::to_string(t->data.size()) +
                             " values, parameter has " + std::to_string(p.value.numel()));
      }
      dst.push_back(t->data);
    }
  }
  return s;
}

template void adam_step(const std::vector<model::NamedParam<float>>&, AdamState&, double, const AdamConfig&);
template void adam_step(const std::vector<model::NamedParam<double>>&, AdamState&, double, const AdamConfig&);
template std::vector<NamedTensor> AdamState::export_state(const std::vector<model::NamedParam<float>>&) const;
template std::vector<NamedTensor> AdamState::export_state(const std::vector<model::NamedParam<double>>&) const;
template AdamState AdamState::import_state(const std::vector<NamedTensor>&,
                                           const std::vector<model::NamedParam<float>>&, std::uint64_t);
template AdamState AdamState::import_state(const std::vector<NamedTensor>&,
                                           const std::vector<model::NamedParam<double>>&, std::uint64_t);

}  // namespace iwsr::train
