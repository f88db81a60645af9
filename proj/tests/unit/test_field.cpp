// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "iwsr/container.hpp"
#include "iwsr/error.hpp"
#include "iwsr/field/grid_io.hpp"
#include "iwsr/field/preprocess.hpp"
#include "iwsr/field/render.hpp"
#include "iwsr/field/resample.hpp"
#include "iwsr/field/synthetic.hpp"

using namespace iwsr;
using namespace iwsr::field;

namespace {

GenConfig small_config() {
  GenConfig c;
  c.nt = 4;
  c.nz = 32;
  c.nx = 64;
  c.dx = 200.0;
  c.wavelength = 1600.0;
  return c;
}

FieldGrid random_grid(std::size_t nt, std::size_t nz, std::size_t nx, std::uint64_t seed) {
  Rng rng(seed);
  FieldGrid g = FieldGrid::zeros(nt, nz, nx, 30.f, 7.5f, 40.f);
  for (auto& v : g.vars)
    for (float& x : v) x = static_cast<float>(normal01(rng));
  for (auto& m : g.terrain) m = uniform01(rng) < 0.2 ? 1 : 0;
  return g;
}

// RMS of du/dx + dw/dz by central differences over interior cells.
double divergence_rms(std::size_t nz, std::size_t nx, double dx) {
  GenConfig c;
  c.nt = 1;
  c.nz = nz;
  c.nx = nx;
  c.dx = dx;
  const FieldGrid g = generate_synthetic(c, TopographyProfile{});
  double ss = 0;
  std::size_t n = 0;
  for (std::size_t k = 1; k + 1 < nz; ++k)
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      const double ux = (g.at(Var::u, 0, k, i + 1) - g.at(Var::u, 0, k, i - 1)) / (2 * g.dx);
      const double wz = (g.at(Var::w, 0, k + 1, i) - g.at(Var::w, 0, k - 1, i)) / (2 * g.dz);
      ss += (ux + wz) * (ux + wz);
      ++n;
    }
  return std::sqrt(ss / static_cast<double>(n));
}

}  // namespace

TEST_CASE("no wave leaves the undisturbed background") {
  GenConfig c = small_config();
  c.amplitude = 0.0;
  const FieldGrid g = generate_synthetic(c, TopographyProfile{});
  for (std::size_t t = 0; t < g.nt; ++t)
    for (std::size_t z = 0; z < g.nz; ++z)
      for (std::size_t x = 0; x < g.nx; ++x) {
        REQUIRE(g.at(Var::u, t, z, x) == 0.f);
        REQUIRE(g.at(Var::w, t, z, x) == 0.f);
        const double zc = (z + 0.5) * c.dz();
        REQUIRE(g.at(Var::T, t, z, x) == static_cast<float>(background_temperature(c, zc)));
        REQUIRE(g.at(Var::S, t, z, x) == static_cast<float>(background_salinity(c, zc)));
      }
}

TEST_CASE("generated velocity is discretely divergence free at second order") {
  const double coarse = divergence_rms(64, 256, 50.0);
  const double fine = divergence_rms(128, 512, 25.0);
  CHECK(coarse > 0.0);
  const double ratio = coarse / fine;
  CHECK(ratio >= 3.0);
  CHECK(ratio <= 5.0);
}

TEST_CASE("wave trough depresses temperature against the far field") {
  const GenConfig c;  // defaults: 64 x 64 x 256, a0 = 30 m, H = 500 m
  const FieldGrid g = generate_synthetic(c, TopographyProfile{});
  const std::size_t xt = static_cast<std::size_t>(c.start * c.length() / c.dx);
  const std::size_t xf = g.nx - 1;
  double worst = 0;
  for (std::size_t z = 0; z < g.nz; ++z) worst = std::min(worst, double(g.at(Var::T, 0, z, xt)) - g.at(Var::T, 0, z, xf));
  // Analytic oracle at the thermocline: displaced background vs undisturbed.
  const double zc = c.cline_height;
  const double sigma = zc / c.depth;
  const double expected = background_temperature(c, zc - c.amplitude * std::sin(M_PI * sigma)) -
                          background_temperature(c, zc);
  CHECK(expected < -1.0);
  CHECK(worst < 0.9 * expected);
  CHECK(worst >= 1.1 * expected - 0.5);
}

TEST_CASE("generator validation") {
  GenConfig c = small_config();
  c.wavelength = 2 * c.dx;
  CHECK_THROWS_AS(generate_synthetic(c, TopographyProfile{}), ResolutionError);
  c = small_config();
  c.amplitude = c.depth;
  CHECK_THROWS_AS(generate_synthetic(c, TopographyProfile{}), ConfigError);
  CHECK_THROWS_AS(parse_topography("canyon"), ConfigError);
  CHECK(parse_topography("sill") == TopographyKind::sill);
}

TEST_CASE("noise is seed deterministic and terrain cells stay zero") {
  GenConfig c = small_config();
  c.noise = 0.05;
  c.seed = 11;
  TopographyProfile topo;
  topo.kind = TopographyKind::sill;
  topo.sill_width = 2000.0;
  const FieldGrid a = generate_synthetic(c, topo);
  const FieldGrid b = generate_synthetic(c, topo);
  CHECK(a == b);
  c.seed = 12;
  CHECK_FALSE(a == generate_synthetic(c, topo));
  CHECK(a.fluid_cells_per_plane() < a.plane());
  for (std::size_t v = 0; v < kNumVars; ++v)
    for (std::size_t i = 0; i < a.cells(); ++i) {
      if (a.terrain[i % a.plane()]) {
        REQUIRE(a.vars[v][i] == 0.f);
      } else {
        REQUIRE(std::isfinite(a.vars[v][i]));
      }
    }
}

TEST_CASE("slope terrain is monotone and below the surface") {
  GenConfig c = small_config();
  TopographyProfile topo;
  topo.kind = TopographyKind::slope;
  const FieldGrid g = generate_synthetic(c, topo);
  for (std::size_t x = 1; x < g.nx; ++x)
    for (std::size_t z = 0; z < g.nz; ++z) REQUIRE(g.solid(z, x) >= g.solid(z, x - 1));
  for (std::size_t x = 0; x < g.nx; ++x) REQUIRE_FALSE(g.solid(g.nz - 1, x));
}

TEST_CASE("terrain_fill") {
  SUBCASE("constant fluid") {
    FieldGrid g = FieldGrid::zeros(2, 2, 2);
    g.terrain = {1, 0, 0, 1};
    for (auto& v : g.vars)
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = g.terrain[i % 4] ? -9.f : 5.f;
    const FieldGrid f = terrain_fill(g);
    for (const auto& v : f.vars)
      for (float x : v) CHECK(x == 5.f);
    CHECK(f.terrain_filled);
  }
  SUBCASE("arithmetic mean of the same time index") {
    FieldGrid g = FieldGrid::zeros(2, 1, 3);
    g.terrain = {0, 1, 0};
    g.var(Var::T) = {1.f, 0.f, 3.f, 10.f, 0.f, 20.f};
    const FieldGrid f = terrain_fill(g);
    CHECK(f.at(Var::T, 0, 0, 1) == 2.f);
    CHECK(f.at(Var::T, 1, 0, 1) == 15.f);
    CHECK(f.at(Var::T, 0, 0, 0) == 1.f);
  }
  SUBCASE("all solid") {
    FieldGrid g = FieldGrid::zeros(1, 2, 2);
    g.terrain.assign(4, 1);
    CHECK_THROWS_AS(terrain_fill(g), DegenerateDomainError);
  }
  SUBCASE("idempotent, and whole-grid statistics match fluid statistics") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const FieldGrid g = random_grid(3, 6, 9, seed);
      const FieldGrid f = terrain_fill(g);
      CHECK(terrain_fill(f) == f);
      const NormStats fs = fluid_stats(f), ws = whole_grid_stats(f);
      for (std::size_t v = 0; v < kNumVars; ++v) {
        CHECK(std::abs(fs.mean[v] - ws.mean[v]) <= 1e-6);
        const ValueRange fr = fluid_range(f, static_cast<Var>(v)), wr = whole_grid_range(f, static_cast<Var>(v));
        CHECK(fr.min == wr.min);
        CHECK(fr.max == wr.max);
        // Filling with means can only shrink the spread.
        CHECK(ws.std[v] <= fs.std[v] + 1e-6);
      }
    }
  }
}

TEST_CASE("normalize and denormalize") {
  const FieldGrid raw = random_grid(3, 6, 9, 3);
  CHECK_THROWS_AS(normalize(raw), OrderingError);
  FieldGrid filled = terrain_fill(raw);
  for (float& x : filled.vars[0]) x = x * 3.f + 20.f;
  filled.var(Var::S).assign(filled.cells(), 34.5f);

  auto [n, stats] = normalize(filled);
  CHECK(n.normalized());
  CHECK_THROWS_AS(normalize(n), OrderingError);
  for (float x : n.var(Var::S)) CHECK(x == 0.f);
  CHECK(stats.std[1] == 1.f);

  const NormStats after = fluid_stats(n);
  for (std::size_t v = 0; v < kNumVars; ++v) {
    if (v == 1) continue;
    CHECK(std::abs(after.mean[v]) <= 1e-5);
    CHECK(std::abs(after.std[v] - 1.f) <= 1e-4);
    const ValueRange fr = fluid_range(n, static_cast<Var>(v)), wr = whole_grid_range(n, static_cast<Var>(v));
    CHECK(wr.min >= fr.min - 1e-6f);
    CHECK(wr.max <= fr.max + 1e-6f);
  }
  const FieldGrid back = denormalize(n);
  CHECK_FALSE(back.normalized());
  for (std::size_t v = 0; v < kNumVars; ++v)
    for (std::size_t i = 0; i < back.cells(); ++i) REQUIRE(std::abs(back.vars[v][i] - filled.vars[v][i]) <= 1e-5);
  CHECK_THROWS_AS(denormalize(back), ContractError);
}

TEST_CASE("downsample shapes") {
  SUBCASE("full grid") {
    const FieldGrid g = FieldGrid::zeros(256, 128, 512);
    const FieldGrid d = downsample(g, {4, 8, 4});
    CHECK(d.nt == 64);
    CHECK(d.nz == 16);
    CHECK(d.nx == 128);
  }
  SUBCASE("training block") {
    const FieldGrid d = downsample(FieldGrid::zeros(16, 128, 128, 60.f, 2.f, 50.f), {4, 8, 4});
    CHECK(d.nt == 4);
    CHECK(d.nz == 16);
    CHECK(d.nx == 32);
    CHECK(d.dt == 240.f);
    CHECK(d.dz == 16.f);
  }
  SUBCASE("constant field") {
    FieldGrid g = FieldGrid::zeros(8, 8, 8);
    for (auto& v : g.vars) v.assign(g.cells(), 2.5f);
    const FieldGrid d = downsample(g, {2, 4, 2});
    for (const auto& v : d.vars)
      for (float x : v) CHECK(x == 2.5f);
  }
  SUBCASE("non divisible names a crop") {
    try {
      downsample(FieldGrid::zeros(10, 8, 8), {4, 8, 4});
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(std::string(e.what()).find("crop to (8, 8, 8)") != std::string::npos);
    }
  }
  SUBCASE("majority mask with ties to solid") {
    FieldGrid g = FieldGrid::zeros(1, 2, 6);
    g.terrain = {1, 0, 1, 1, 0, 0,
                 0, 1, 1, 0, 0, 0};
    const FieldGrid d = downsample(g, {1, 2, 2});
    CHECK(d.terrain == std::vector<std::uint8_t>{1, 1, 0});
  }
}

TEST_CASE("patch extraction and sampling") {
  const FieldGrid g = random_grid(4, 6, 10, 5);
  CHECK(extract_patch(g, {0, 0, 0}, {4, 6, 10}) == g);
  const FieldGrid p = extract_patch(g, {1, 2, 3}, {2, 3, 4});
  CHECK(p.at(Var::u, 1, 2, 3) == g.at(Var::u, 2, 4, 6));
  CHECK(p.solid(1, 1) == g.solid(3, 4));
  CHECK_THROWS_AS(extract_patch(g, {3, 0, 0}, {2, 1, 1}), RangeError);

  PatchSampler a({4, 6, 10}, {2, 3, 4}, 99), b({4, 6, 10}, {2, 3, 4}, 99);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  PatchSampler s({4, 6, 40}, {2, 3, 8}, 1);
  std::set<std::size_t> xs;
  for (int i = 0; i < 10000; ++i) {
    const Factors o = s.next();
    REQUIRE(o[2] + 8 <= 40);
    xs.insert(o[2]);
  }
  CHECK(xs.size() == 33);
}

TEST_CASE("baseline upsampling") {
  const FieldGrid g = random_grid(3, 4, 5, 8);
  SUBCASE("unit factors are the identity") {
    FieldGrid id = baseline_upsample(g, {1, 1, 1}, UpsampleMethod::cubic);
    CHECK(id == g);
    CHECK(baseline_upsample(g, {1, 1, 1}, UpsampleMethod::trilinear) == g);
  }
  SUBCASE("trilinear reproduces a ramp") {
    FieldGrid lr = FieldGrid::zeros(3, 4, 5);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t z = 0; z < 4; ++z)
        for (std::size_t x = 0; x < 5; ++x) lr.vars[0][lr.index(t, z, x)] = 0.5f * t - 0.25f * z + 0.125f * x + 1.f;
    const Factors f{2, 4, 3};
    const FieldGrid hr = baseline_upsample(lr, f, UpsampleMethod::trilinear);
    CHECK(hr.nz == 16);
    for (std::size_t t = 0; t < hr.nt; ++t)
      for (std::size_t z = 0; z < hr.nz; ++z)
        for (std::size_t x = 0; x < hr.nx; ++x) {
          const double qt = (t + 0.5) / f[0] - 0.5, qz = (z + 0.5) / f[1] - 0.5, qx = (x + 0.5) / f[2] - 0.5;
          REQUIRE(std::abs(hr.at(Var::T, t, z, x) - (0.5 * qt - 0.25 * qz + 0.125 * qx + 1.0)) <= 1e-5);
        }
  }
  SUBCASE("cubic reproduces a quadratic away from clamped edges") {
    FieldGrid lr = FieldGrid::zeros(1, 1, 12);
    auto quad = [](double q) { return 0.02 * q * q - 0.3 * q + 1.5; };
    for (std::size_t x = 0; x < 12; ++x) lr.vars[2][x] = static_cast<float>(quad(double(x)));
    const std::size_t f = 4;
    const FieldGrid hr = baseline_upsample(lr, {1, 1, f}, UpsampleMethod::cubic);
    std::size_t checked = 0;
    for (std::size_t x = 0; x < hr.nx; ++x) {
      const double q = (x + 0.5) / f - 0.5;
      if (q < 1.0 || q > 10.0) continue;  // all four taps in range
      REQUIRE(std::abs(hr.at(Var::u, 0, 0, x) - quad(q)) <= 1e-5);
      ++checked;
    }
    CHECK(checked > 30);
  }
  SUBCASE("downsample then trilinear upsample reproduces a linear field") {
    FieldGrid hr = FieldGrid::zeros(8, 16, 16);
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t z = 0; z < 16; ++z)
        for (std::size_t x = 0; x < 16; ++x)
          for (auto& v : hr.vars) v[hr.index(t, z, x)] = 0.1f * t + 0.05f * z - 0.03f * x;
    const Factors f{4, 8, 4};
    const FieldGrid back = baseline_upsample(downsample(hr, f), f, UpsampleMethod::trilinear);
    for (std::size_t v = 0; v < kNumVars; ++v)
      for (std::size_t i = 0; i < hr.cells(); ++i) REQUIRE(std::abs(back.vars[v][i] - hr.vars[v][i]) <= 1e-5);
  }
  SUBCASE("mask upsampled by nearest neighbour") {
    const FieldGrid hr = baseline_upsample(g, {1, 2, 2}, UpsampleMethod::trilinear);
    for (std::size_t z = 0; z < hr.nz; ++z)
      for (std::size_t x = 0; x < hr.nx; ++x) REQUIRE(hr.solid(z, x) == g.solid(z / 2, x / 2));
  }
}

TEST_CASE("container round trip and rejection") {
  FieldGrid g = terrain_fill(random_grid(3, 5, 7, 21));
  g = normalize(g).first;
  const auto path = std::filesystem::temp_directory_path() / "iwsr_test_field.iwsr";
  save_grid(g, path);
  const FieldGrid back = load_grid(path);
  CHECK(back == g);
  CHECK(back.norm == g.norm);

  const auto tensors = read_container(path);
  const NamedTensor* terrain = find_tensor(tensors, "terrain");
  REQUIRE(terrain != nullptr);
  CHECK(terrain->dims == std::vector<std::uint64_t>{5, 7});

  auto bytes = encode_container(grid_to_tensors(g));
  CHECK(decode_container(bytes) == tensors);

  SUBCASE("corrupted magic") {
    bytes[0] = 'X';
    try {
      decode_container(bytes);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }
  SUBCASE("bad version") {
    bytes[4] = 2;
    try {
      decode_container(bytes);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
  }
  SUBCASE("truncation") {
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(decode_container(bytes), FormatError);
  }
  SUBCASE("missing tensor") {
    auto ts = grid_to_tensors(g);
    ts.erase(ts.begin() + 4);
    CHECK_THROWS_AS(grid_from_tensors(ts), FormatError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("slice rendering") {
  FieldGrid g = FieldGrid::zeros(2, 3, 4);
  g.terrain[0] = 1;  // bottom-left cell
  for (auto& v : g.vars) std::fill(v.begin(), v.end(), 2.5f);
  const auto img = render_slice_ppm(g, Var::T, 1);
  const std::string header = "P6\n4 3\n255\n";
  REQUIRE(img.size() == header.size() + 3 * 12);
  CHECK(std::string(img.begin(), img.begin() + header.size()) == header);
  const std::uint8_t* px = img.data() + header.size();
  // Constant field: every fluid pixel is the neutral colour; terrain sits on
  // the last (deepest) row.
  for (std::size_t i = 0; i < 12; ++i) {
    const bool terrain = i == 8;
    for (int c = 0; c < 3; ++c) CHECK(px[3 * i + c] == (terrain ? kTerrainRgb[c] : 255));
  }

  g.vars[2][g.index(0, 2, 3)] = -1.f;  // top-right at t = 0
  g.vars[2][g.index(0, 1, 1)] = 1.f;
  const auto u = render_slice_ppm(g, Var::u, 0);
  const std::uint8_t* q = u.data() + header.size();
  CHECK(q[3 * 3 + 2] > q[3 * 3 + 0]);  // negative extreme is blue
  CHECK(q[3 * 5 + 0] > q[3 * 5 + 2]);  // positive extreme is red
  CHECK_THROWS_AS(render_slice_ppm(g, Var::u, 2), RangeError);
}
