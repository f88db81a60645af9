// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "iwsr/error.hpp"
#include "iwsr/field/resample.hpp"
#include "iwsr/field/synthetic.hpp"
#include "iwsr/log.hpp"
#include "iwsr/metrics/metrics.hpp"
#include "iwsr/random.hpp"

using namespace iwsr;
using namespace iwsr::metrics;
using field::FieldGrid;

namespace {

// A smooth travelling pattern over a grid with a flat bottom of `rows` solid rows.
FieldGrid pattern(std::size_t nt, std::size_t nz, std::size_t nx, std::size_t rows) {
  FieldGrid g = FieldGrid::zeros(nt, nz, nx);
  for (std::size_t z = 0; z < rows; ++z)
    for (std::size_t x = 0; x < nx; ++x) g.terrain[z * nx + x] = 1;
  const double pi = std::numbers::pi;
  for (std::size_t n = 0; n < nt; ++n)
    for (std::size_t z = 0; z < nz; ++z)
      for (std::size_t x = 0; x < nx; ++x) {
        if (g.solid(z, x)) continue;
        const double ph = 2 * pi * (double(x) / double(nx) - 0.05 * double(n));
        const double zz = double(z) / double(nz);
        const std::size_t i = g.index(n, z, x);
        g.vars[0][i] = float(std::sin(ph) * std::cos(pi * zz));
        g.vars[1][i] = float(0.5 * std::cos(ph + 0.3) + zz);
        g.vars[2][i] = float(std::sin(2 * ph) * zz);
        g.vars[3][i] = float(std::cos(ph) * (1 - zz) + 0.2);
      }
  return g;
}

struct WarningCapture {
  std::vector<std::string> messages;
  WarningSink previous;
  WarningCapture() {
    previous = set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { set_warning_sink(previous); }
};

}  // namespace

TEST_CASE("psnr closed form and exactness") {
  // Truth alternates 0 and 1 so the fluid range is exactly 1; pred is offset by 0.1.
  std::vector<float> truth(2 * 4 * 6), pred(truth.size());
  std::vector<std::uint8_t> mask(4 * 6, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth[i] = float(i % 2);
    pred[i] = truth[i] + 0.1f;
  }
  const Psnr p = psnr(pred, truth, mask, 2, 4, 6);
  CHECK_FALSE(p.exact);
  CHECK(std::abs(p.db - 20.0) < 1e-4);

  const Psnr same = psnr(truth, truth, mask, 2, 4, 6);
  CHECK(same.exact);
  CHECK(same.db == kPsnrCap);

  CHECK(psnr_from_mse(1e-30, 1.0).db == kPsnrCap);
}

TEST_CASE("psnr is translation invariant and ignores terrain values") {
  FieldGrid truth = pattern(3, 10, 16, 2);
  FieldGrid pred = truth;
  Rng rng(3);
  for (auto& v : pred.vars)
    for (auto& x : v) x += float(0.05 * normal01(rng));
  const double base = psnr(pred, truth, Var::T).db;

  FieldGrid pt = pred, tt = truth;
  for (auto& x : pt.vars[0]) x += 7.5f;
  for (auto& x : tt.vars[0]) x += 7.5f;
  CHECK(psnr(pt, tt, Var::T).db == doctest::Approx(base).epsilon(1e-4));

  FieldGrid junk = pred;
  for (std::size_t i = 0; i < junk.cells(); ++i)
    if (junk.terrain[i % junk.plane()]) junk.vars[0][i] = 1e6f;
  CHECK(psnr(junk, truth, Var::T).db == base);
  CHECK(ssim(junk, truth, Var::T) == ssim(pred, truth, Var::T));
}

TEST_CASE("metrics reject an all-solid mask") {
  FieldGrid g = FieldGrid::zeros(2, 3, 3);
  std::fill(g.terrain.begin(), g.terrain.end(), std::uint8_t{1});
  CHECK_THROWS_AS(psnr(g, g, Var::T), DegenerateDomainError);
  CHECK_THROWS_AS(ssim(g, g, Var::T), DegenerateDomainError);
}

TEST_CASE("ssim identity, anticorrelation and noise") {
  const FieldGrid truth = pattern(4, 24, 32, 3);
  for (std::size_t v = 0; v < 4; ++v) CHECK(std::abs(ssim(truth, truth, Var(v)) - 1.0) < 1e-6);

  // A modulated checkerboard is zero-mean inside every window, so negating it
  // leaves the luminance term near 1 and flips the structure term.
  FieldGrid board = truth;
  for (std::size_t i = 0; i < board.cells(); ++i) {
    const std::size_t x = i % board.nx, z = (i / board.nx) % board.nz;
    board.vars[0][i] = float(((x + z) % 2 ? 1.0 : -1.0) * (1.0 + 0.3 * std::sin(0.2 * double(x))));
  }
  FieldGrid neg = board;
  for (auto& x : neg.vars[0]) x = -x;
  CHECK(ssim(neg, board, Var::T) < 0.0);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    FieldGrid noise = truth;
    Rng rng(seed);
    for (auto& x : noise.vars[0]) x = float(normal01(rng));
    const double s = ssim(noise, truth, Var::T);
    CHECK(std::abs(s) < 0.2);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("ssim window shrinks on small slices") {
  const FieldGrid truth = pattern(2, 6, 9, 0);
  FieldGrid pred = truth;
  pred.vars[0][5] += 0.3f;
  WarningCapture cap;
  const double s = ssim(pred, truth, Var::T);
  REQUIRE(cap.messages.size() == 1);
  CHECK(cap.messages[0].find("using 5") != std::string::npos);
  CHECK(s < 1.0);
  CHECK(s > 0.0);
}

TEST_CASE("kinetic energy error") {
  const FieldGrid truth = pattern(3, 8, 12, 1);
  CHECK(ke_error(truth, truth).value == 0.0);

  FieldGrid scaled = truth;
  for (std::size_t v : {2u, 3u})
    for (auto& x : scaled.vars[v]) x = float(x * std::sqrt(2.0));
  CHECK(ke_error(scaled, truth).value == doctest::Approx(1.0).epsilon(1e-6));

  FieldGrid flipped = truth;
  for (auto& x : flipped.vars[2]) x = -x;
  CHECK(ke_error(flipped, truth).value == 0.0);

  FieldGrid still = truth;
  std::fill(still.vars[2].begin(), still.vars[2].end(), 0.f);
  std::fill(still.vars[3].begin(), still.vars[3].end(), 0.f);
  const KeError undefined = ke_error(truth, still);
  CHECK(undefined.undefined);
  CHECK(std::isnan(undefined.value));
}

TEST_CASE("fft mse identity, shift invariance and symmetry") {
  const FieldGrid truth = pattern(4, 8, 16, 2);
  CHECK(fft_mse(truth, truth) == 0.0);

  // The flat bottom is invariant under x shifts, so the filled fields are too.
  FieldGrid shifted = truth;
  for (std::size_t v = 0; v < 4; ++v)
    for (std::size_t n = 0; n < truth.nt; ++n)
      for (std::size_t z = 0; z < truth.nz; ++z)
        for (std::size_t x = 0; x < truth.nx; ++x)
          shifted.vars[v][truth.index(n, z, (x + 5) % truth.nx)] = truth.vars[v][truth.index(n, z, x)];
  CHECK(fft_mse(shifted, truth) < 1e-10);

  FieldGrid other = truth;
  Rng rng(11);
  for (auto& v : other.vars)
    for (auto& x : v) x = float(x * 1.3 + 0.2 * normal01(rng));
  const double ab = fft_mse(other, truth), ba = fft_mse(truth, other);
  CHECK(ab > 0.0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
}

TEST_CASE("fft mse grows quadratically with a sinusoidal perturbation") {
  const FieldGrid truth = pattern(4, 8, 16, 0);
  const std::size_t n = truth.cells();
  std::vector<double> eps, err;
  for (double e : {1e-4, 1e-3, 1e-2, 1e-1}) {
    std::vector<float> pred(truth.vars[0]);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t x = i % truth.nx, z = (i / truth.nx) % truth.nz;
      pred[i] += float(e * std::sin(2 * std::numbers::pi * (3.0 * double(x) / 16.0 + 2.0 * double(z) / 8.0)));
    }
    eps.push_back(std::log10(e));
    err.push_back(std::log10(fft_mse(pred, truth.vars[0], truth.terrain, truth.nt, truth.nz, truth.nx)));
  }
  // Least-squares slope of log(err) against log(eps).
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    mx += eps[i] / double(eps.size());
    my += err[i] / double(eps.size());
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    sxy += (eps[i] - mx) * (err[i] - my);
    sxx += (eps[i] - mx) * (eps[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("report: identity, text layout and baseline ordering") {
  field::GenConfig gc;
  gc.nt = 8;
  gc.nz = 32;
  gc.nx = 64;
  gc.dx = 100.0;
  field::TopographyProfile topo;
  topo.kind = field::TopographyKind::sill;
  const FieldGrid truth = field::generate_synthetic(gc, topo);

  const MetricReport id = eval_report(truth, truth, "synthetic", "identity");
  for (std::size_t v = 0; v < 4; ++v) {
    CHECK(id.psnr[v].exact);
    CHECK(std::abs(id.ssim[v] - 1.0) < 1e-6);
  }
  CHECK(id.ke.value == 0.0);
  CHECK(id.fft_mse == 0.0);

  const std::string text = id.to_text();
  CHECK(text == eval_report(truth, truth, "synthetic", "identity").to_text());
  CHECK(text.rfind("grid_id: synthetic\nmodel_id: identity\npsnr.T: 99.000000\npsnr.T.exact: true\n", 0) == 0);
  CHECK(text.find("psnr.avg") < text.find("ke_error"));
  CHECK(text.find("ke_error") < text.find("fft_mse"));

  FieldGrid lr = field::downsample(truth, {2, 4, 4});
  FieldGrid up = field::baseline_upsample(lr, {2, 4, 4}, field::UpsampleMethod::trilinear);
  up.terrain = truth.terrain;
  const MetricReport base = eval_report(up, truth, "synthetic", "trilinear");
  CHECK(base.psnr_avg < id.psnr_avg);
  CHECK(base.ke.value >= 0.0);
  for (double s : base.ssim) {
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
  }

  const std::string table = comparison_table({{"trilinear", base}, {"identity", id}});
  CHECK(table.find("trilinear") != std::string::npos);
  CHECK(table.find("Avg. PSNR") != std::string::npos);
  CHECK(table.find("FFT MSE") != std::string::npos);

  FieldGrid wrong = truth;
  wrong.terrain[0] ^= 1;
  CHECK_THROWS_AS(eval_report(wrong, truth), DimensionError);
}
