// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

// Finite-difference oracle for reverse-mode gradients. It only ever calls
// the forward function, so it stays independent of every backward rule.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "iwsr/ad/ops.hpp"
#include "iwsr/ad/tensor.hpp"

namespace iwsr::ad {

using TensorD = Tensor<double>;

inline TensorD random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = u(rng);
  return TensorD(std::move(shape), std::move(v));
}

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                             double floor = 1e-12) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

struct GradCheckResult {
  double worst_relative_error = 0;  // per input tensor
  double joint_relative_error = 0;  // all checked inputs as one vector
  std::size_t checked_inputs = 0;
};

/// Compares analytic gradients of scalar f(inputs) against central
/// differences with step h, for every input that requires a gradient.
inline GradCheckResult gradcheck(const std::function<TensorD(const std::vector<TensorD>&)>& f,
                                 std::vector<TensorD> inputs, double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  TensorD loss = f(inputs);
  backward(loss);

  GradCheckResult result;
  std::vector<double> all_analytic, all_numeric;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<double> numeric(t.numel());
    {
      NoGradGuard guard;
      for (std::size_t i = 0; i < t.numel(); ++i) {
        const double saved = t[i];
        t[i] = saved + h;
        const double up = f(inputs).item();
        t[i] = saved - h;
        const double down = f(inputs).item();
        t[i] = saved;
        numeric[i] = (up - down) / (2 * h);
      }
    }
    result.worst_relative_error = std::max(result.worst_relative_error, relative_error(analytic, numeric));
    all_analytic.insert(all_analytic.end(), analytic.begin(), analytic.end());
    all_numeric.insert(all_numeric.end(), numeric.begin(), numeric.end());
    ++result.checked_inputs;
  }
  result.joint_relative_error = relative_error(all_analytic, all_numeric);
  return result;
}

/// Random linear functional sum(w * y), used to turn tensor outputs into scalars.
inline TensorD project(const TensorD& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

}  // namespace iwsr::ad
