// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "iwsr/ad/gradcheck.hpp"
#include "iwsr/field/synthetic.hpp"
#include "iwsr/model/superres.hpp"
#include "iwsr/physics/residuals.hpp"

namespace iwsr::selftest {
namespace {

using ad::TensorD;
using Fn = std::function<TensorD(const std::vector<TensorD>&)>;

TensorD param(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t = ad::random_tensor(std::move(shape), rng, lo, hi);
  t.set_requires_grad();
  return t;
}

double op_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const TensorD x = param({2, 4, 4, 4}, rng);
  const TensorD k = param({3, 2, 3, 3, 3}, rng);
  const TensorD b = param({3}, rng);
  const TensorD xs = param({4, 2, 3, 3}, rng);
  const TensorD g = param({4}, rng);
  const TensorD beta = param({4}, rng);
  const TensorD m = param({5, 4}, rng);
  const TensorD a = param({4, 3}, rng);
  const TensorD pts = param({6, 3}, rng, 0.1, 0.9);
  ad::Conv3dOptions pad;
  pad.padding = {1, 1, 1};

  const std::vector<Fn> cases = {
      [&](const auto& in) { return ad::project(ad::conv3d(in[0], in[1], in[2], pad), seed); },
      [&](const auto& in) { return ad::project(ad::group_norm(in[8], 2, in[3], in[4]), seed); },
      [&](const auto& in) { return ad::project(ad::ifft3(ad::fft3(ad::square(in[0]))), seed); },
      [&](const auto& in) { return ad::project(ad::fft3(in[0]).imag, seed); },
      [&](const auto& in) { return ad::project(ad::trilinear_sample(in[0], in[7]), seed); },
      [&](const auto& in) { return ad::project(ad::avg_pool(ad::nearest_upsample(in[0], {1, 2, 1}), {2, 2, 2}), seed); },
      [&](const auto& in) { return ad::project(ad::silu(ad::matmul(in[5], in[6])), seed); },
      [&](const auto& in) { return ad::project(ad::sigmoid(ad::concat<double>({in[5], in[5]}, 0)), seed); },
  };
  double worst = 0;
  for (const auto& f : cases)
    worst = std::max(worst, ad::gradcheck(f, {x, k, b, g, beta, m, a, pts, xs}).worst_relative_error);
  return worst;
}

double end_to_end(std::uint64_t seed) {
  model::ModelConfig cfg = model::ModelConfig::for_lr_block({2, 2, 2}, 8);
  cfg.encoder.seed = seed;
  cfg.decoder.width = 8;
  cfg.decoder.depth = 2;
  cfg.decoder.seed = seed + 1;
  model::SuperResModel<double> net(cfg);
  std::mt19937_64 rng(seed);
  const TensorD lr = param({4, 2, 2, 2}, rng);
  const TensorD pts = ad::random_tensor({5, 3}, rng, 0.1, 0.9);
  const model::LatentMap map = net.latent_map({4, 8, 8}, {2, 4, 4});
  std::vector<TensorD> inputs{lr};
  for (const auto& p : net.parameters()) inputs.push_back(p.value);
  const Fn f = [&](const auto& in) { return ad::project(net.decode(net.encode(in[0]), pts, map), seed); };
  // Joint error: conv biases ahead of a group norm have gradients at round-off level.
  return ad::gradcheck(f, inputs).joint_relative_error;
}

}  // namespace

GradientCheck gradient_suite(std::size_t seeds) {
  GradientCheck r;
  r.seeds = seeds;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    r.ops_error = std::max(r.ops_error, op_suite(s));
    r.end_to_end_error = std::max(r.end_to_end_error, end_to_end(s));
  }
  return r;
}

FftCheck fft_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> v(16 * 16 * 4);
  for (auto& e : v) e = u(rng);
  const ad::Tensor<float> x({16, 16, 4}, v);
  const auto z = ad::fft3(x);
  const auto back = ad::ifft3(z);
  FftCheck r;
  double e_space = 0, e_freq = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    r.roundtrip_max_error = std::max(r.roundtrip_max_error, double(std::abs(back[i] - x[i])));
    e_space += double(x[i]) * x[i];
    e_freq += double(z.real[i]) * z.real[i] + double(z.imag[i]) * z.imag[i];
  }
  r.parseval_relative = std::abs(e_space - e_freq) / e_space;
  return r;
}

ContinuityCheck continuity_suite() {
  auto rms = [](std::size_t nz, std::size_t nx, double dx) {
    field::GenConfig c;
    c.nt = 2;
    c.nz = nz;
    c.nx = nx;
    c.dx = dx;
    field::TopographyProfile topo;
    topo.kind = field::TopographyKind::sill;
    return field::continuity_rms(field::generate_synthetic(c, topo));
  };
  ContinuityCheck r;
  r.coarse = rms(64, 256, 50.0);
  r.fine = rms(128, 512, 25.0);
  r.ratio = r.coarse / r.fine;

  const double lx = 3000, lz = 500;
  physics::GridScales scales;
  scales.extent = {900, lz, lx};
  const physics::PredictFn<double> linear = [&](const TensorD& p) {
    TensorD y({p.dim(0), 5});
    for (std::size_t i = 0; i < p.dim(0); ++i) {
      y[i * 5 + 2] = p[i * 3 + 2] * lx;
      y[i * 5 + 3] = -p[i * 3 + 1] * lz;
    }
    return y;
  };
  std::mt19937_64 rng(3);
  const TensorD pts = ad::random_tensor({50, 3}, rng, 0.2, 0.8);
  const auto res = physics::pde_residuals(linear, pts, physics::StencilConfig{}, physics::PhysParams{}, scales);
  for (double v : res.residual[physics::kContinuity].data()) r.linear_residual = std::max(r.linear_residual, std::abs(v));
  return r;
}

}  // namespace iwsr::selftest
