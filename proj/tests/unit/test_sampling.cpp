// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "iwsr/error.hpp"
#include "iwsr/sampling/edge.hpp"

using namespace iwsr;
using namespace iwsr::sampling;

namespace {

std::vector<std::uint8_t> flat_bottom(std::size_t nz, std::size_t nx, std::size_t rows) {
  std::vector<std::uint8_t> m(nz * nx, 0);
  for (std::size_t z = 0; z < rows; ++z)
    for (std::size_t x = 0; x < nx; ++x) m[z * nx + x] = 1;
  return m;
}

// A sloping bottom with a bump, so edges are not a single row.
EdgeSet hill(std::size_t nz = 24, std::size_t nx = 40) {
  std::vector<std::uint8_t> m(nz * nx, 0);
  for (std::size_t x = 0; x < nx; ++x) {
    const double h = 3.0 + 8.0 * std::exp(-std::pow((double(x) - 25.0) / 6.0, 2)) + 0.1 * double(x);
    for (std::size_t z = 0; z < nz; ++z) m[z * nx + x] = double(z) < h ? 1 : 0;
  }
  return extract_edges(m, nz, nx);
}

double distance_to_edges(const EdgeSet& e, const Point& p) {
  double best = 1e9;
  for (const auto& c : e.cells) {
    const Point q = e.centre(c);
    best = std::min(best, std::hypot(p[1] - q[1], p[2] - q[2]));
  }
  return best;
}

}  // namespace

TEST_CASE("edge extraction") {
  SUBCASE("flat bottom gives one boundary cell per column") {
    for (std::size_t k : {1, 3, 7}) {
      const EdgeSet e = extract_edges(flat_bottom(10, 17, k), 10, 17);
      CHECK(e.length() == 17);
      for (const auto& c : e.cells) CHECK(c.z == k);
      CHECK_FALSE(e.degenerate);
    }
  }
  SUBCASE("all fluid") {
    const EdgeSet e = extract_edges(std::vector<std::uint8_t>(30, 0), 5, 6);
    CHECK(e.length() == 0);
    CHECK(e.degenerate);
  }
  SUBCASE("single interior solid cell") {
    std::vector<std::uint8_t> m(25, 0);
    m[2 * 5 + 2] = 1;
    const EdgeSet e = extract_edges(m, 5, 5);
    CHECK(e.length() == 4);
    CHECK(e.cells == std::vector<EdgeCell>{{1, 2}, {2, 1}, {2, 3}, {3, 2}});
  }
  CHECK_THROWS_AS(extract_edges(std::vector<std::uint8_t>(5, 0), 2, 3), DimensionError);
}

TEST_CASE("edge point sampling") {
  const EdgeSet e = hill();
  REQUIRE(e.length() > 10);
  SUBCASE("requested count is ceil(s L)") {
    EdgeSet ten;
    ten.nz = 4;
    ten.nx = 10;
    ten.mask = flat_bottom(4, 10, 1);
    ten.cells = extract_edges(ten.mask, 4, 10).cells;
    REQUIRE(ten.length() == 10);
    Rng rng(1);
    const EdgeSample s = sample_edge_points(ten, 3.0, 0.0, rng);
    CHECK(s.requested == 30);
    CHECK(s.points.size() == 30);
    Rng rng2(1);
    CHECK(sample_edge_points(ten, 2.05, 0.0, rng2).requested == 21);
  }
  SUBCASE("zero radius lands on edge-cell centres") {
    Rng rng(2);
    const EdgeSample s = sample_edge_points(e, 2.0, 0.0, rng);
    for (const Point& p : s.points) {
      CHECK(distance_to_edges(e, p) == 0.0);
      CHECK_FALSE(e.solid_at(p));
    }
  }
  SUBCASE("points stay within r of an edge and in fluid") {
    const double r = 0.08;
    Rng rng(3);
    const EdgeSample s = sample_edge_points(e, 4.0, r, rng);
    CHECK(s.points.size() == s.requested);
    for (const Point& p : s.points) {
      REQUIRE(distance_to_edges(e, p) <= r + 1e-12);
      REQUIRE_FALSE(e.solid_at(p));
      for (double v : p) REQUIRE((v >= 0.0 && v <= 1.0));
    }
  }
  SUBCASE("impossible filter gives a partial sample") {
    Rng rng(4);
    // A huge radius throws most points out of the cube or into rock.
    const EdgeSample s = sample_edge_points(e, 50.0, 40.0, rng);
    CHECK(s.partial);
    CHECK(s.points.size() < s.requested);
  }
}

TEST_CASE("batch assembly") {
  const EdgeSet e = hill();
  SamplingConfig cfg;
  cfg.radius = 0.05;
  SUBCASE("half edge half random") {
    const SampleBatch b = assemble_batch(e, cfg, 7);
    CHECK(b.n_edge == 512);
    CHECK(b.n_random == 512);
    CHECK(b.points.size() == 1024);
    CHECK(std::count(b.flags.begin(), b.flags.end(), Provenance::edge) == 512);
    for (std::size_t i = 0; i < b.points.size(); ++i) {
      REQUIRE_FALSE(e.solid_at(b.points[i]));
      if (b.flags[i] == Provenance::edge) REQUIRE(distance_to_edges(e, b.points[i]) <= cfg.radius + 1e-12);
    }
  }
  SUBCASE("deterministic for a seed") {
    const SampleBatch a = assemble_batch(e, cfg, 9), b = assemble_batch(e, cfg, 9);
    CHECK(a.points == b.points);
    CHECK(a.flags == b.flags);
    CHECK_FALSE(assemble_batch(e, cfg, 10).points == a.points);
  }
  SUBCASE("edge fraction over 100 batches") {
    cfg.edge_fraction = 0.3;
    cfg.batch = 256;
    std::size_t edge = 0, total = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const SampleBatch b = assemble_batch(e, cfg, s);
      edge += b.n_edge;
      total += b.points.size();
    }
    CHECK(std::abs(double(edge) / double(total) - 0.3) <= 0.02);
  }
  SUBCASE("empty edge set gives an all-random batch") {
    const EdgeSet none = extract_edges(std::vector<std::uint8_t>(40, 0), 5, 8);
    const SampleBatch b = assemble_batch(none, cfg, 1);
    CHECK(b.n_edge == 0);
    CHECK(b.n_random == cfg.batch);
  }
  SUBCASE("disabled edge sampling equals uniform sampling") {
    cfg.edge_enabled = false;
    const SampleBatch b = assemble_batch(e, cfg, 5), u = uniform_batch(e, cfg.batch, 5);
    CHECK(b.points == u.points);
    CHECK(b.n_edge == 0);
  }
  SUBCASE("config validation") {
    cfg.edge_fraction = 0.99;
    CHECK_THROWS_AS(assemble_batch(e, cfg, 1), ConfigError);
    cfg = SamplingConfig{};
    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("edge coefficient update") {
  CHECK(update_edge_coefficient(0.4, 2.0, 2.0, 0.05, 0.95) == doctest::Approx(0.4));
  CHECK(update_edge_coefficient(0.2, 4.0, 1.0, 0.05, 0.95) == doctest::Approx(0.4));
  CHECK(update_edge_coefficient(0.6, 4.0, 1.0, 0.05, 0.95) == 0.95);
  CHECK(update_edge_coefficient(0.6, 0.0, 1.0, 0.05, 0.95) == 0.05);
  CHECK(update_edge_coefficient(0.5, 1.0, 0.0, 0.05, 0.95) == 0.95);
  Rng rng(3);
  double a = 0.5, prev_ratio = 0, prev = 0;
  for (int i = 0; i < 1000; ++i) {
    const double le = uniform01(rng) * 3, lr = uniform01(rng) * 3;
    a = update_edge_coefficient(a, le, lr, 0.05, 0.95);
    REQUIRE((a >= 0.05 && a <= 0.95));
  }
  for (int i = 1; i <= 50; ++i) {
    const double ratio = 0.1 * i;
    const double v = update_edge_coefficient(0.3, ratio, 1.0, 0.05, 0.95);
    if (i > 1) REQUIRE(v >= prev);
    prev = v;
    prev_ratio = ratio;
  }
  CHECK(prev_ratio == doctest::Approx(5.0));
  CHECK(default_radius(64, 64, 8, 4) == doctest::Approx(8.0 / 63));
}
