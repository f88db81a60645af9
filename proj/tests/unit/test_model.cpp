// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <tuple>

#include "gradcheck.hpp"
#include "iwsr/error.hpp"
#include "iwsr/model/decoder.hpp"
#include "iwsr/model/encoder.hpp"

using namespace iwsr;
using namespace iwsr::model;
using iwsr::testing::gradcheck;
using iwsr::testing::project;
using iwsr::testing::random_tensor;
using TensorD = ad::Tensor<double>;
using TensorF = ad::Tensor<float>;

namespace {

// Independent count: conv 3^3 + norm + gate + real spectral conv + bias-free
// imaginary spectral conv (absent on lattices of extent <= 2) + projection.
std::size_t hfrb_params(std::size_t ci, std::size_t co, bool imag) {
  std::size_t n = co * ci * 27 + co + 2 * co + ci + 1 + (co * ci + co);
  if (imag) n += co * ci;
  if (ci != co) n += co * ci + co;
  return n;
}

template <class R>
void randomize(ParamList<R>& params, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& p : params.items()) {
    Tensor<R> t = p.value;
    uniform_init(t, rng, 0.3);
  }
}

}  // namespace

TEST_CASE("HFRB of zero input with zero convs is zero") {
  ParamList<double> params;
  Rng rng(1);
  HfrbConfig cfg{3, 8, 3, true, true, 0};
  Hfrb<double> block(params, "b", cfg, rng);
  block.conv().zero();
  block.skip().zero();
  const TensorD y = block(TensorD({3, 2, 4, 6}));
  CHECK(y.shape() == ad::Shape{8, 2, 4, 6});
  for (double v : y.data()) REQUIRE(v == 0.0);
}

TEST_CASE("HFRB keeps the spatial-temporal shape") {
  std::mt19937_64 rng(3);
  for (const auto& s : {ad::Shape{2, 3, 5, 7}, ad::Shape{2, 1, 1, 1}, ad::Shape{2, 4, 8, 2}}) {
    ParamList<float> params;
    Rng r(2);
    Hfrb<float> block(params, "b", HfrbConfig{2, 5}, r);
    TensorF x(s);
    for (float& v : x.data()) v = static_cast<float>(uniform01(r));
    const TensorF y = block(x);
    CHECK(y.shape() == ad::Shape{5, s[1], s[2], s[3]});
  }
  ParamList<float> params;
  Rng r(2);
  Hfrb<float> block(params, "b", HfrbConfig{2, 5}, r);
  CHECK_THROWS_AS(block(TensorF({3, 2, 2, 2})), DimensionError);
}

TEST_CASE("HFRB ablation changes outputs") {
  std::mt19937_64 g(5);
  const TensorD x = random_tensor({4, 2, 4, 4}, g);
  ParamList<double> pa, pb;
  Rng ra(9), rb(9);
  Hfrb<double> full(pa, "b", HfrbConfig{4, 4, 3, true, true, 0}, ra);
  Hfrb<double> plain(pb, "b", HfrbConfig{4, 4, 3, false, false, 0}, rb);
  randomize(pa, 77);
  const TensorD y1 = full(x), y2 = plain(x);
  double diff = 0;
  for (std::size_t i = 0; i < y1.numel(); ++i) diff = std::max(diff, std::abs(y1[i] - y2[i]));
  CHECK(diff > 1e-3);
}

TEST_CASE("HFRB gradients match finite differences") {
  ParamList<double> params;
  Rng rng(4);
  HfrbConfig hc{2, 4};
  hc.groups = 2;
  Hfrb<double> block(params, "b", hc, rng);
  randomize(params, 5);
  std::mt19937_64 g(6);
  TensorD x = random_tensor({2, 2, 3, 4}, g);
  x.set_requires_grad(true);
  std::vector<TensorD> inputs{x};
  for (const auto& p : params.items()) inputs.push_back(p.value);
  const auto r = gradcheck([&](const std::vector<TensorD>& in) { return project(block(in[0]), 17); }, inputs);
  CHECK(r.checked_inputs == inputs.size());
  CHECK(r.worst_relative_error <= 1e-6);
}

TEST_CASE("downsample schedule") {
  CHECK(stage_factors({4, 16, 16}) == Triple{1, 2, 2});
  CHECK(stage_factors({4, 4, 4}) == Triple{2, 2, 2});
  CHECK(stage_factors({4, 8, 16}) == Triple{1, 1, 2});
  CHECK_THROWS_AS(stage_factors({1, 1, 1}), ScheduleError);
  CHECK_THROWS_AS(stage_factors({1, 3, 2}), ScheduleError);

  const auto sched = down_schedule({4, 16, 16}, 4);
  REQUIRE(sched.size() == 4);
  TensorF x({3, 4, 16, 16});
  for (const auto& f : sched) x = downsample_stage(x, f);
  CHECK(x.shape() == ad::Shape{3, 1, 1, 1});
  for (auto it = sched.rbegin(); it != sched.rend(); ++it) x = upsample_stage(x, *it);
  CHECK(x.shape() == ad::Shape{3, 4, 16, 16});

  CHECK_THROWS_AS(down_schedule({4, 16, 32}, 4), ConfigError);
  CHECK_NOTHROW(down_schedule({4, 16, 32}, 5));
  EncoderConfig bad;
  bad.input_size = {3, 16, 16};
  CHECK_THROWS_AS(Encoder<float>{bad}, ConfigError);
  bad = EncoderConfig{};
  bad.up.pop_back();
  CHECK_THROWS_AS(Encoder<float>{bad}, ConfigError);
}

TEST_CASE("encoder follows the design table") {
  const EncoderConfig cfg;
  Encoder<float> enc(cfg);
  Rng rng(1);
  TensorF x({4, 4, 16, 16});
  for (float& v : x.data()) v = static_cast<float>(normal01(rng));
  std::vector<StageTrace> trace;
  const TensorF y = enc(x, &trace);
  CHECK(y.shape() == ad::Shape{32, 4, 16, 16});

  // Rows of the table as [C, T, Z, X] -> output channels (0 for resampling).
  const std::vector<StageTrace> expected = {
      {"HFRB", {4, 4, 16, 16}, 16},   {"HFRB", {16, 4, 16, 16}, 32}, {"DownSamp", {32, 4, 16, 16}, 0},
      {"HFRB", {32, 4, 8, 8}, 64},    {"DownSamp", {64, 4, 8, 8}, 0}, {"HFRB", {64, 4, 4, 4}, 128},
      {"DownSamp", {128, 4, 4, 4}, 0}, {"HFRB", {128, 2, 2, 2}, 256}, {"DownSamp", {256, 2, 2, 2}, 0},
      {"HFRB", {256, 1, 1, 1}, 128},  {"UpSamp", {128, 1, 1, 1}, 0}, {"HFRB", {128, 2, 2, 2}, 64},
      {"UpSamp", {64, 2, 2, 2}, 0},   {"HFRB", {64, 4, 4, 4}, 32},   {"UpSamp", {32, 4, 4, 4}, 0},
      {"HFRB", {32, 4, 8, 8}, 16},    {"UpSamp", {16, 4, 8, 8}, 0},  {"HFRB", {32, 4, 16, 16}, 32},
  };
  REQUIRE(trace.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    INFO("row " << i);
    CHECK(trace[i].op == expected[i].op);
    CHECK(trace[i].input == expected[i].input);
    CHECK(trace[i].channels == expected[i].channels);
  }

  const TensorF y2 = enc(x);
  CHECK(std::equal(y.data().begin(), y.data().end(), y2.data().begin()));

  std::size_t formula = 0;
  for (auto [ci, co, imag] : std::vector<std::tuple<std::size_t, std::size_t, bool>>{{4, 16, true},
                                                                                      {16, 32, true},
                                                                                      {32, 64, true},
                                                                                      {64, 128, true},
                                                                                      {128, 256, false},
                                                                                      {256, 128, false},
                                                                                      {128, 64, false},
                                                                                      {64, 32, true},
                                                                                      {32, 16, true},
                                                                                      {32, 32, true}})
    formula += hfrb_params(ci, co, imag);
  CHECK(formula == 2573662u);
  CHECK(enc.parameter_count() == 2573662u);
}

TEST_CASE("every encoder parameter receives gradient") {
  EncoderConfig cfg;
  cfg.down = {8, 8, 16, 16};
  cfg.up = {16, 8, 8, 16};
  cfg.input_size = {2, 8, 8};
  cfg.seed = 3;
  Encoder<float> enc(cfg);
  Rng rng(2);
  TensorF x({4, 2, 8, 8});
  for (float& v : x.data()) v = static_cast<float>(normal01(rng));
  TensorF w(ad::Shape{16, 2, 8, 8});
  for (float& v : w.data()) v = static_cast<float>(normal01(rng));
  ad::backward(ad::sum(ad::mul(enc(x), w)));
  for (const auto& p : enc.params().items()) {
    INFO(p.name);
    REQUIRE(p.value.has_grad());
    double mag = 0;
    for (float g : p.value.grad()) mag = std::max(mag, double(std::abs(g)));
    CHECK(mag > 0.0);
  }
}

TEST_CASE("skip-all-levels and plain-conv variants") {
  EncoderConfig cfg;
  cfg.input_size = {4, 16, 16};
  cfg.skip_all_levels = true;
  Encoder<float> wide(cfg);
  CHECK(wide.parameter_count() > Encoder<float>(EncoderConfig{}).parameter_count());
  TensorF x({4, 4, 16, 16}, 0.25f);
  CHECK(wide(x).shape() == ad::Shape{32, 4, 16, 16});

  EncoderConfig plain_cfg;
  plain_cfg.block = BlockKind::conv;
  Encoder<float> plain(plain_cfg), full(EncoderConfig{});
  Rng rng(8);
  for (float& v : x.data()) v = static_cast<float>(normal01(rng));
  const TensorF a = plain(x), b = full(x);
  CHECK(a.shape() == b.shape());
  double diff = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, double(std::abs(a[i] - b[i])));
  CHECK(diff > 1e-3);
}

TEST_CASE("latent interpolation") {
  std::mt19937_64 g(1);
  const TensorD latent = random_tensor({6, 3, 4, 5}, g);
  SUBCASE("lattice node") {
    const TensorD p({1, 3}, {0.5, 1.0 / 3.0, 0.75});
    const TensorD f = interpolate_latent(latent, p);
    for (std::size_t c = 0; c < 6; ++c) CHECK(f[c] == doctest::Approx(latent[((c * 3 + 1) * 4 + 1) * 5 + 3]).epsilon(1e-12));
  }
  SUBCASE("constant latent") {
    const TensorD c({6, 3, 4, 5}, 2.5);
    const TensorD p = random_tensor({20, 3}, g, 0.0, 1.0);
    const TensorD f = interpolate_latent(c, p);
    for (double v : f.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("linear in x is collinear") {
    TensorD lin({2, 2, 2, 5});
    for (std::size_t i = 0; i < lin.numel(); ++i) lin[i] = 0.7 * static_cast<double>(i % 5) - 1.0;
    const TensorD p({3, 3}, {0.3, 0.6, 0.0, 0.3, 0.6, 0.5, 0.3, 0.6, 1.0});
    const TensorD f = interpolate_latent(lin, p);
    CHECK(std::abs(f[4] - 2 * f[2] + f[0]) <= 1e-6);
    CHECK(std::abs(f[4] - f[0]) > 1.0);
  }
}

TEST_CASE("decoder") {
  PcnConfig cfg;
  cfg.latent_channels = 6;
  cfg.depth = 3;
  cfg.width = 16;
  std::mt19937_64 g(2);
  const TensorD latent = random_tensor({6, 3, 4, 5}, g);
  const TensorD pts = random_tensor({7, 3}, g, 0.0, 1.0);

  SUBCASE("zero head") {
    PcnConfig z = cfg;
    z.zero_head = true;
    const TensorD y = Decoder<double>(z)(latent, pts);
    CHECK(y.shape() == ad::Shape{7, 5});
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("five outputs for any config") {
    for (std::size_t d : {1, 2, 6}) {
      PcnConfig c = cfg;
      c.depth = d;
      c.width = 8 * d;
      CHECK(Decoder<double>(c)(latent, pts).shape() == ad::Shape{7, 5});
    }
    PcnConfig bad = cfg;
    bad.width = 4;
    CHECK_THROWS_AS(Decoder<double>{bad}, ConfigError);
  }
  SUBCASE("coordinate gradient matches finite differences") {
    Decoder<double> dec(cfg);
    TensorD p = pts.clone();
    p.set_requires_grad(true);
    const auto r = gradcheck([&](const std::vector<TensorD>& in) { return project(dec(latent, in[0]), 4); }, {p});
    CHECK(r.worst_relative_error <= 1e-4);
  }
  SUBCASE("weight gradients match finite differences") {
    Decoder<double> dec(cfg);
    std::vector<TensorD> inputs;
    for (const auto& p : dec.params().items()) inputs.push_back(p.value);
    const auto r = gradcheck([&](const std::vector<TensorD>&) { return project(dec(latent, pts), 8); }, inputs);
    CHECK(r.worst_relative_error <= 1e-6);
  }
  SUBCASE("batching and order") {
    Decoder<double> dec(cfg);
    const TensorD all = dec(latent, pts);
    for (std::size_t i = 0; i < 7; ++i) {
      const TensorD one = dec(latent, ad::slice(pts, 0, i, i + 1));
      for (std::size_t c = 0; c < 5; ++c) CHECK(one[c] == doctest::Approx(all[i * 5 + c]).epsilon(1e-12));
    }
    const std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    std::vector<TensorD> rows;
    for (auto i : perm) rows.push_back(ad::slice(pts, 0, i, i + 1));
    const TensorD permuted = dec(latent, ad::concat(rows, 0));
    for (std::size_t k = 0; k < 7; ++k)
      for (std::size_t c = 0; c < 5; ++c) CHECK(permuted[k * 5 + c] == doctest::Approx(all[perm[k] * 5 + c]).epsilon(1e-12));
    CHECK_THROWS_AS(dec(latent, TensorD({0, 3})), ContractError);
  }
  SUBCASE("finite slope over random pairs") {
    Decoder<double> dec(cfg);
    const TensorD a = random_tensor({10000, 3}, g, 0.0, 1.0), b = random_tensor({10000, 3}, g, 0.0, 1.0);
    const TensorD ya = dec(latent, a), yb = dec(latent, b);
    double worst = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
      double dp = 0, dy = 0;
      for (std::size_t k = 0; k < 3; ++k) dp += (a[i * 3 + k] - b[i * 3 + k]) * (a[i * 3 + k] - b[i * 3 + k]);
      for (std::size_t c = 0; c < 5; ++c) dy += (ya[i * 5 + c] - yb[i * 5 + c]) * (ya[i * 5 + c] - yb[i * 5 + c]);
      if (dp > 0) worst = std::max(worst, std::sqrt(dy / dp));
    }
    CHECK(std::isfinite(worst));
    CHECK(worst < 1e4);
  }
}

TEST_CASE("default decoder handles a 1024 point batch quickly") {
  Decoder<float> dec(PcnConfig{});
  CHECK(dec.parameter_count() == 89733);
  Rng rng(3);
  TensorF latent({32, 4, 16, 32});
  for (float& v : latent.data()) v = static_cast<float>(normal01(rng));
  latent.set_requires_grad(true);
  TensorF pts({1024, 3});
  for (float& v : pts.data()) v = static_cast<float>(uniform01(rng));
  const auto t0 = std::chrono::steady_clock::now();
  ad::backward(ad::mean(ad::square(dec(latent, pts))));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("1024-point forward+backward: " << secs << " s");
  CHECK(secs < 2.0);
}
