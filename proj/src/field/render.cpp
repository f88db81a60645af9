// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/field/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "iwsr/error.hpp"

namespace iwsr::field {
namespace {

constexpr double kCold[3] = {59, 76, 192};
constexpr double kHot[3] = {180, 4, 38};

}  // namespace

std::vector<std::uint8_t> render_slice_ppm(const FieldGrid& g, Var v, std::size_t t) {
  g.validate();
  if (t >= g.nt) throw RangeError("time index " + std::to_string(t) + " is outside [0, " + std::to_string(g.nt) + ")");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t z = 0; z < g.nz; ++z)
    for (std::size_t x = 0; x < g.nx; ++x) {
      if (g.solid(z, x)) continue;
      const double a = g.at(v, t, z, x);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  double centre = 0.5 * (lo + hi), span = 0.5 * (hi - lo);
  if (lo < 0 && hi > 0) {
    centre = 0;
    span = std::max(-lo, hi);
  }

  const std::string header = "P6\n" + std::to_string(g.nx) + " " + std::to_string(g.nz) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + 3 * g.plane());
  for (std::size_t row = 0; row < g.nz; ++row) {
    const std::size_t z = g.nz - 1 - row;
    for (std::size_t x = 0; x < g.nx; ++x) {
      if (g.solid(z, x)) {
        out.insert(out.end(), std::begin(kTerrainRgb), std::end(kTerrainRgb));
        continue;
      }
      const double s = span > 0 ? std::clamp((g.at(v, t, z, x) - centre) / span, -1.0, 1.0) : 0.0;
      const double* end = s < 0 ? kCold : kHot;
      const double f = std::abs(s);
      for (int c = 0; c < 3; ++c) out.push_back(static_cast<std::uint8_t>(std::lround(255.0 + f * (end[c] - 255.0))));
    }
  }
  return out;
}

}  // namespace iwsr::field
