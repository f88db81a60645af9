// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iwsr/field/grid.hpp"

namespace iwsr::metrics {

using field::FieldGrid;
using field::kNumVars;
using field::Var;

/// Reported value for an exact reconstruction.
inline constexpr double kPsnrCap = 99.0;

struct Psnr {
  double db = 0;
  bool exact = false;  // MSE == 0; db holds kPsnrCap
};

/// 10 log10(range^2 / mse), capped for mse == 0.
Psnr psnr_from_mse(double mse, double range);

/// PSNR of one variable over fluid cells, range = truth max - min over fluid
/// cells. The mask (nz * nx, 1 = solid) is applied to every time index.
/// Throws DegenerateDomainError for an all-solid mask.
Psnr psnr(std::span<const float> pred, std::span<const float> truth, std::span<const std::uint8_t> mask,
          std::size_t nt, std::size_t nz, std::size_t nx);
Psnr psnr(const FieldGrid& pred, const FieldGrid& truth, Var v);

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01, k2 = 0.03;
};

/// Masked SSIM over each (z, x) slice, averaged over fluid-centred windows and
/// then over time. Windows only see fluid cells inside the grid. A grid
/// smaller than the window shrinks it (odd size) and emits a warning.
double ssim(std::span<const float> pred, std::span<const float> truth, std::span<const std::uint8_t> mask,
            std::size_t nt, std::size_t nz, std::size_t nx, const SsimConfig& cfg = {});
double ssim(const FieldGrid& pred, const FieldGrid& truth, Var v, const SsimConfig& cfg = {});

struct KeError {
  double value = 0;
  bool undefined = false;  // truth has zero kinetic energy; value is NaN
};

/// Relative error of total kinetic energy 0.5 (u^2 + w^2) over fluid cells.
KeError ke_error(const FieldGrid& pred, const FieldGrid& truth);

/// Magnitude-spectrum MSE of one variable. Terrain cells of both fields are
/// replaced by the per-time fluid mean, both fields are standardised with a
/// common mean and scale (the averages of their fluid means and variances),
/// and the orthonormal 3-D FFT magnitudes are compared over all frequencies.
double fft_mse(std::span<const float> pred, std::span<const float> truth, std::span<const std::uint8_t> mask,
               std::size_t nt, std::size_t nz, std::size_t nx);
/// Average over the four variables, masked by the truth terrain.
double fft_mse(const FieldGrid& pred, const FieldGrid& truth);

struct MetricReport {
  std::string grid_id;
  std::string model_id;
  std::array<Psnr, kNumVars> psnr{};
  std::array<double, kNumVars> ssim{};
  double psnr_avg = 0;
  double ssim_avg = 0;
  KeError ke{};
  double fft_mse = 0;

  /// "key: value" lines in a fixed order.
  std::string to_text() const;
};

/// Throws DimensionError when shapes or terrain masks differ.
MetricReport eval_report(const FieldGrid& pred, const FieldGrid& truth, std::string grid_id = {},
                         std::string model_id = {});

/// Side-by-side table with rows per variable (PSNR, SSIM), the averages,
/// KE-Error and FFT-MSE, one column per named report.
std::string comparison_table(const std::vector<std::pair<std::string, MetricReport>>& columns);

}  // namespace iwsr::metrics
