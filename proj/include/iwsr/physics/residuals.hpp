// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <string_view>
#include <vector>

#include "iwsr/ad/ops.hpp"
#include "iwsr/field/grid.hpp"

namespace iwsr::physics {

using ad::Tensor;

struct PhysParams {
  double nu_h = 1e-3;  // m^2/s
  double nu_z = 1e-6;  // m^2/s
  double kappa_t = 0.0, kappa_s = 0.0;
  double g = 9.81;
  double rho0 = 1025.0;
  double alpha = 2e-4;  // 1/degC
  double beta = 7.6e-4; // 1/psu
  double t0 = 10.0, s0 = 34.5;
  /// Pa per unit of the decoder's pressure channel.
  double pressure_scale = 100.0;

  void validate() const;
};

/// Linear equation of state.
double eos_density(double t, double s, const PhysParams& p);

/// Normalised stencil steps (t, z, x).
struct StencilConfig {
  std::array<double, 3> h{1e-2, 1e-2, 1e-2};

  /// Half a lattice cell of the HR grid per axis.
  static StencilConfig for_lattice(std::size_t nt, std::size_t nz, std::size_t nx);
  /// ConfigError when a step is below 1e-6 or above 0.5.
  void validate() const;
};

/// Maps the unit cube back to physical units.
struct GridScales {
  std::array<double, 3> extent{1, 1, 1};  // (L_t s, L_z m, L_x m) spanned by [0, 1]
  double z_origin = 0.0;                  // height (m above the block floor) of zhat = 0
  field::NormStats stats;                 // default stats leave predictions unchanged
  // Background density per level, level k at height (k + 0.5) * profile_dz.
  double profile_dz = 1.0;
  std::vector<double> rho_bar;

  /// Background density at normalised height zhat (linear between levels,
  /// held constant past the ends). rho0 when there is no profile.
  double background_density(double zhat, const PhysParams& params) const;

  /// Scales for the HR lattice obtained by refining `lr` by `factors`. The
  /// profile is the per-level fluid mean density of `lr` (denormalised when
  /// it carries statistics).
  static GridScales from_lr(const field::FieldGrid& lr, std::array<std::size_t, 3> factors, const PhysParams& params);
};

enum Equation : std::size_t { kMomX = 0, kMomZ, kContinuity, kTemperature, kSalinity, kNumEquations };
inline constexpr std::array<std::string_view, kNumEquations> kEquationNames = {"x_momentum", "z_momentum",
                                                                              "continuity", "temperature", "salinity"};

template <class R>
struct ResidualSet {
  std::array<Tensor<R>, kNumEquations> residual;  // each [K, 1], physical units
  /// RMS over the batch of the largest term magnitude per point, floored at
  /// 1e-8 (constants for differentiation).
  std::array<double, kNumEquations> scale{};
};

/// points [N, 3] -> predictions [N, 5] (normalised T, S, u, w and p-hat).
template <class R>
using PredictFn = std::function<Tensor<R>(const Tensor<R>& points)>;

/// Evaluates predict at each centre and +-h along every axis (7 positions
/// per point, one batched call). Centres are pulled into [h, 1 - h] so the
/// stencil stays inside the unit cube.
template <class R>
ResidualSet<R> pde_residuals(const PredictFn<R>& predict, const Tensor<R>& points, const StencilConfig& stencil,
                             const PhysParams& params, const GridScales& scales);

/// Sum over equations of mean(r^2) / scale^2.
template <class R> Tensor<R> pde_loss(const ResidualSet<R>& residuals);
/// Same with fixed per-equation scales (ConfigError unless all positive).
template <class R>
Tensor<R> pde_loss(const ResidualSet<R>& residuals, const std::array<double, kNumEquations>& scale);
/// The per-equation terms of pde_loss, as plain numbers.
template <class R> std::array<double, kNumEquations> pde_loss_terms(const ResidualSet<R>& residuals);

struct LossConfig {
  double gamma = 0.3;  // weight of the PDE term; regression gets 1 - gamma
  /// Raw mode: mse + lambda * pde instead of the convex combination.
  bool raw = false;
  double lambda = 5e3;

  void validate() const;
  bool uses_pde() const { return raw ? lambda != 0.0 : gamma != 0.0; }
};

/// Mean squared error over the four supervised channels of pred [N, >=4]
/// against truth [N, 4].
template <class R> Tensor<R> regression_mse(const Tensor<R>& pred, const Tensor<R>& truth);

/// gamma * pde + (1 - gamma) * mse (or mse + lambda * pde in raw mode). The
/// PDE tensor may be undefined when the config does not use it.
template <class R> Tensor<R> total_loss(const Tensor<R>& mse, const Tensor<R>& pde, const LossConfig& cfg);

}  // namespace iwsr::physics
