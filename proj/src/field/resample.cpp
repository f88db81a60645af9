// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/field/resample.hpp"

#include <cmath>
#include <string>

#include "iwsr/error.hpp"

namespace iwsr::field {
namespace {

std::string triple(std::size_t a, std::size_t b, std::size_t c) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ", " + std::to_string(c) + ")";
}

void check_factors(Factors f) {
  for (std::size_t a : f)
    if (a == 0) throw ConfigError("resampling factors must be >= 1");
}

// Interpolates along one axis of a row-major [n0, n1, n2] array.
std::vector<float> upsample_axis(const std::vector<float>& src, const Factors& dims, int axis, std::size_t f,
                                 UpsampleMethod method) {
  if (f == 1) return src;
  Factors out_dims = dims;
  out_dims[axis] *= f;
  const std::size_t n = dims[axis], m = out_dims[axis];
  std::size_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= dims[a];
  for (int a = axis + 1; a < 3; ++a) inner *= dims[a];

  // Four taps per output index; trilinear uses two of them.
  struct Taps {
    std::array<std::size_t, 4> idx{};
    std::array<double, 4> w{};
  };
  std::vector<Taps> taps(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(f) - 0.5;
    Taps& tp = taps[i];
    if (n == 1) {
      tp.idx = {0, 0, 0, 0};
      tp.w = {1, 0, 0, 0};
      continue;
    }
    if (method == UpsampleMethod::trilinear) {
      const auto j = static_cast<std::ptrdiff_t>(std::clamp(std::floor(q), 0.0, static_cast<double>(n - 2)));
      const double t = q - static_cast<double>(j);
      tp.idx = {static_cast<std::size_t>(j), static_cast<std::size_t>(j + 1), 0, 0};
      tp.w = {1 - t, t, 0, 0};
    } else {
      const auto j = static_cast<std::ptrdiff_t>(std::floor(q));
      const double t = q - static_cast<double>(j);
      const double t2 = t * t, t3 = t2 * t;
      tp.w = {-0.5 * t3 + t2 - 0.5 * t, 1.5 * t3 - 2.5 * t2 + 1, -1.5 * t3 + 2 * t2 + 0.5 * t, 0.5 * t3 - 0.5 * t2};
      for (int k = 0; k < 4; ++k) {
        const std::ptrdiff_t s = std::clamp<std::ptrdiff_t>(j - 1 + k, 0, static_cast<std::ptrdiff_t>(n) - 1);
        tp.idx[k] = static_cast<std::size_t>(s);
      }
    }
  }

  std::vector<float> out(outer * m * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    const float* s = src.data() + o * n * inner;
    float* d = out.data() + o * m * inner;
    for (std::size_t i = 0; i < m; ++i) {
      const Taps& tp = taps[i];
      for (std::size_t k = 0; k < inner; ++k) {
        double acc = 0;
        for (int a = 0; a < 4; ++a) acc += tp.w[a] * s[tp.idx[a] * inner + k];
        d[i * inner + k] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace

FieldGrid downsample(const FieldGrid& grid, Factors f) {
  grid.validate();
  check_factors(f);
  if (grid.nt % f[0] || grid.nz % f[1] || grid.nx % f[2]) {
    throw DimensionError("grid " + triple(grid.nt, grid.nz, grid.nx) + " is not divisible by factors " +
                         triple(f[0], f[1], f[2]) + "; crop to " +
                         triple(grid.nt - grid.nt % f[0], grid.nz - grid.nz % f[1], grid.nx - grid.nx % f[2]) +
                         " or any multiple of the factors");
  }
  const std::size_t nt = grid.nt / f[0], nz = grid.nz / f[1], nx = grid.nx / f[2];
  FieldGrid out = FieldGrid::zeros(nt, nz, nx, grid.dt * static_cast<float>(f[0]),
                                   grid.dz * static_cast<float>(f[1]), grid.dx * static_cast<float>(f[2]));
  out.terrain_filled = grid.terrain_filled;
  out.norm = grid.norm;
  const double inv = 1.0 / static_cast<double>(f[0] * f[1] * f[2]);
  for (std::size_t v = 0; v < kNumVars; ++v) {
    const auto& a = grid.vars[v];
    auto& b = out.vars[v];
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t x = 0; x < nx; ++x) {
          double acc = 0;
          for (std::size_t dt = 0; dt < f[0]; ++dt)
            for (std::size_t dz = 0; dz < f[1]; ++dz) {
              const float* row = a.data() + grid.index(t * f[0] + dt, z * f[1] + dz, x * f[2]);
              for (std::size_t dx = 0; dx < f[2]; ++dx) acc += row[dx];
            }
          b[out.index(t, z, x)] = static_cast<float>(acc * inv);
        }
  }
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t x = 0; x < nx; ++x) {
      std::size_t solid = 0;
      for (std::size_t dz = 0; dz < f[1]; ++dz)
        for (std::size_t dx = 0; dx < f[2]; ++dx) solid += grid.solid(z * f[1] + dz, x * f[2] + dx);
      out.terrain[z * nx + x] = 2 * solid >= f[1] * f[2] ? 1 : 0;
    }
  return out;
}

FieldGrid extract_patch(const FieldGrid& grid, Factors o, Factors s) {
  grid.validate();
  const Factors dims{grid.nt, grid.nz, grid.nx};
  for (int a = 0; a < 3; ++a) {
    if (s[a] == 0 || o[a] + s[a] > dims[a]) {
      throw RangeError("patch origin " + triple(o[0], o[1], o[2]) + " with sizes " + triple(s[0], s[1], s[2]) +
                       " does not fit in grid " + triple(dims[0], dims[1], dims[2]));
    }
  }
  FieldGrid out = FieldGrid::zeros(s[0], s[1], s[2], grid.dt, grid.dz, grid.dx);
  out.terrain_filled = grid.terrain_filled;
  out.norm = grid.norm;
  for (std::size_t v = 0; v < kNumVars; ++v)
    for (std::size_t t = 0; t < s[0]; ++t)
      for (std::size_t z = 0; z < s[1]; ++z) {
        const float* src = grid.vars[v].data() + grid.index(o[0] + t, o[1] + z, o[2]);
        std::copy(src, src + s[2], out.vars[v].data() + out.index(t, z, 0));
      }
  for (std::size_t z = 0; z < s[1]; ++z)
    for (std::size_t x = 0; x < s[2]; ++x) out.terrain[z * s[2] + x] = grid.terrain[(o[1] + z) * grid.nx + o[2] + x];
  return out;
}

PatchSampler::PatchSampler(Factors g, Factors p, std::uint64_t seed) : rng_(seed) {
  for (int a = 0; a < 3; ++a) {
    if (p[a] == 0 || p[a] > g[a]) {
      throw RangeError("patch sizes " + triple(p[0], p[1], p[2]) + " do not fit in grid " + triple(g[0], g[1], g[2]));
    }
    extent_[a] = g[a] - p[a] + 1;
  }
}

Factors PatchSampler::next() {
  Factors o;
  for (int a = 0; a < 3; ++a) o[a] = static_cast<std::size_t>(uniform_index(rng_, extent_[a]));
  return o;
}

UpsampleMethod parse_upsample_method(std::string_view name) {
  if (name == "trilinear") return UpsampleMethod::trilinear;
  if (name == "cubic") return UpsampleMethod::cubic;
  throw ConfigError("unknown upsampling method '" + std::string(name) + "' (expected trilinear or cubic)");
}

FieldGrid baseline_upsample(const FieldGrid& grid, Factors f, UpsampleMethod method) {
  grid.validate();
  check_factors(f);
  FieldGrid out = FieldGrid::zeros(grid.nt * f[0], grid.nz * f[1], grid.nx * f[2], grid.dt / static_cast<float>(f[0]),
                                   grid.dz / static_cast<float>(f[1]), grid.dx / static_cast<float>(f[2]));
  out.terrain_filled = grid.terrain_filled;
  out.norm = grid.norm;
  for (std::size_t v = 0; v < kNumVars; ++v) {
    Factors dims{grid.nt, grid.nz, grid.nx};
    std::vector<float> data = grid.vars[v];
    for (int a = 0; a < 3; ++a) {
      data = upsample_axis(data, dims, a, f[a], method);
      dims[a] *= f[a];
    }
    out.vars[v] = std::move(data);
  }
  for (std::size_t z = 0; z < out.nz; ++z)
    for (std::size_t x = 0; x < out.nx; ++x) out.terrain[z * out.nx + x] = grid.terrain[(z / f[1]) * grid.nx + x / f[2]];
  return out;
}

}  // namespace iwsr::field
