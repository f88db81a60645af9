// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "iwsr/ad/ops.hpp"
#include "iwsr/container.hpp"
#include "iwsr/random.hpp"

namespace iwsr::model {

using ad::Shape;
using ad::Tensor;
using ad::Triple;

template <class R>
struct NamedParam {
  std::string name;
  Tensor<R> value;
};

/// Ordered list of trainable tensors. Layers hold handles that share storage
/// with the entries here.
template <class R>
class ParamList {
 public:
  Tensor<R> add(std::string name, Shape shape);
  const std::vector<NamedParam<R>>& items() const { return items_; }
  std::size_t scalar_count() const;
  void zero_grad();

  /// Float copies of every parameter, each name prefixed.
  std::vector<NamedTensor> export_state(const std::string& prefix) const;
  /// Copies values from `tensors` (names prefixed). Throws FormatError on a
  /// missing tensor or shape mismatch.
  void import_state(const std::vector<NamedTensor>& tensors, const std::string& prefix);

 private:
  std::vector<NamedParam<R>> items_;
};

/// Fills with U(-bound, bound).
template <class R> void uniform_init(Tensor<R>& t, Rng& rng, double bound);

template <class R>
class Conv3d {
 public:
  Conv3d() = default;
  /// Cubic kernel of side `k` with same padding.
  Conv3d(ParamList<R>& params, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, Rng& rng,
         bool with_bias = true);
  Tensor<R> operator()(const Tensor<R>& x) const;
  void zero();
  const Tensor<R>& weight() const { return weight_; }
  const Tensor<R>& bias() const { return bias_; }

 private:
  Tensor<R> weight_, bias_;
  std::size_t k_ = 1;
};

template <class R>
class Linear {
 public:
  Linear() = default;
  Linear(ParamList<R>& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  /// [N, in] -> [N, out].
  Tensor<R> operator()(const Tensor<R>& x) const;
  void zero();

 private:
  Tensor<R> weight_, bias_;  // [in, out], [out]
};

template <class R>
class GroupNorm {
 public:
  GroupNorm() = default;
  GroupNorm(ParamList<R>& params, const std::string& name, std::size_t channels, std::size_t groups);
  Tensor<R> operator()(const Tensor<R>& x) const;

 private:
  Tensor<R> gamma_, beta_;
  std::size_t groups_ = 1;
};

}  // namespace iwsr::model
