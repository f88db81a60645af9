// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iwsr/container.hpp"
#include "iwsr/model/layers.hpp"

namespace iwsr::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators, one entry per parameter in model order.
struct AdamState {
  std::vector<std::vector<float>> m, v;
  std::uint64_t step = 0;

  /// Zeroed moments shaped like `params`.
  template <class R>
  static AdamState zeros_like(const std::vector<model::NamedParam<R>>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.value.numel(), 0.f);
      s.v.emplace_back(p.value.numel(), 0.f);
    }
    return s;
  }

  /// "adam.m.<name>" / "adam.v.<name>" tensors for each named parameter.
  template <class R>
  std::vector<NamedTensor> export_state(const std::vector<model::NamedParam<R>>& params) const;
  /// MigrationError when a moment tensor is missing or mis-shaped.
  template <class R>
  static AdamState import_state(const std::vector<NamedTensor>& tensors,
                                const std::vector<model::NamedParam<R>>& params, std::uint64_t step);
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient. Parameters without a gradient count as zero gradient. Throws
/// DimensionError when the state does not match the parameters.
template <class R>
void adam_step(const std::vector<model::NamedParam<R>>& params, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace iwsr::train
