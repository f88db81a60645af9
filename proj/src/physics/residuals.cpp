// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/physics/residuals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iwsr/error.hpp"

namespace iwsr::physics {

void PhysParams::validate() const {
  if (nu_h < 0 || nu_z < 0 || kappa_t < 0 || kappa_s < 0) throw ConfigError("viscosities and diffusivities must be >= 0");
  if (!(rho0 > 0)) throw ConfigError("reference density must be positive");
}

double eos_density(double t, double s, const PhysParams& p) {
  return p.rho0 * (1.0 - p.alpha * (t - p.t0) + p.beta * (s - p.s0));
}

StencilConfig StencilConfig::for_lattice(std::size_t nt, std::size_t nz, std::size_t nx) {
  StencilConfig c;
  const std::size_t n[3] = {nt, nz, nx};
  for (int a = 0; a < 3; ++a) c.h[a] = 0.5 / static_cast<double>(std::max<std::size_t>(n[a], 1));
  return c;
}

void StencilConfig::validate() const {
  for (double v : h) {
    if (!(v >= 1e-6)) throw ConfigError("stencil step " + std::to_string(v) + " is below 1e-6");
    if (v > 0.5) throw ConfigError("stencil step " + std::to_string(v) + " exceeds half the unit cube");
  }
}

double GridScales::background_density(double zhat, const PhysParams& params) const {
  if (rho_bar.empty()) return params.rho0;
  const double q = (z_origin + zhat * extent[1]) / profile_dz - 0.5;
  if (q <= 0) return rho_bar.front();
  const double last = static_cast<double>(rho_bar.size() - 1);
  if (q >= last) return rho_bar.back();
  const auto k = static_cast<std::size_t>(q);
  const double w = q - static_cast<double>(k);
  return (1 - w) * rho_bar[k] + w * rho_bar[k + 1];
}

GridScales GridScales::from_lr(const field::FieldGrid& lr, std::array<std::size_t, 3> f, const PhysParams& params) {
  GridScales s;
  const std::size_t n[3] = {lr.nt * f[0], lr.nz * f[1], lr.nx * f[2]};
  const double d[3] = {double(lr.dt) / double(f[0]), double(lr.dz) / double(f[1]), double(lr.dx) / double(f[2])};
  for (int a = 0; a < 3; ++a) s.extent[a] = static_cast<double>(std::max<std::size_t>(n[a] - 1, 1)) * d[a];
  s.z_origin = 0.5 * d[1];
  s.profile_dz = lr.dz;
  if (lr.norm) s.stats = *lr.norm;
  const auto& st = s.stats;
  const auto& T = lr.var(field::Var::T);
  const auto& S = lr.var(field::Var::S);
  s.rho_bar.assign(lr.nz, params.rho0);
  for (std::size_t z = 0; z < lr.nz; ++z) {
    std::size_t fluid = 0;
    for (std::size_t x = 0; x < lr.nx; ++x) fluid += !lr.solid(z, x);
    double acc = 0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < lr.nt; ++t)
      for (std::size_t x = 0; x < lr.nx; ++x) {
        if (fluid && lr.solid(z, x)) continue;
        const std::size_t i = lr.index(t, z, x);
        acc += eos_density(st.mean[0] + double(st.std[0]) * T[i], st.mean[1] + double(st.std[1]) * S[i], params);
        ++count;
      }
    if (count) s.rho_bar[z] = acc / static_cast<double>(count);
  }
  return s;
}

namespace {

constexpr double kScaleFloor = 1e-8;

template <class R>
double rms_of_max(const std::vector<Tensor<R>>& terms) {
  const std::size_t k = terms.front().numel();
  double ss = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double m = 0;
    for (const auto& t : terms) m = std::max(m, std::abs(static_cast<double>(t[i])));
    ss += m * m;
  }
  const double rms = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(k, 1)));
  // Floor keeps roundoff-level equations (e.g. constant fields) from being
  // blown up to order one.
  return std::isfinite(rms) ? std::max(rms, kScaleFloor) : 1.0;
}

template <class R>
Tensor<R> sum_terms(const std::vector<Tensor<R>>& terms) {
  Tensor<R> r = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) r = ad::add(r, terms[i]);
  return r;
}

}  // namespace

template <class R>
ResidualSet<R> pde_residuals(const PredictFn<R>& predict, const Tensor<R>& points, const StencilConfig& stencil,
                             const PhysParams& params, const GridScales& scales) {
  stencil.validate();
  params.validate();
  if (points.rank() != 2 || points.dim(1) != 3 || points.dim(0) == 0) {
    throw ContractError("pde_residuals needs a non-empty [K, 3] point batch, got " + ad::to_string(points.shape()));
  }
  const std::size_t K = points.dim(0);
  const auto& h = stencil.h;

  // Rows: centre, then (+, -) for t, z, x.
  Tensor<R> P({7 * K, 3});
  std::vector<double> zhat(K);
  for (std::size_t i = 0; i < K; ++i) {
    double c[3];
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(static_cast<double>(points[i * 3 + a]), h[a], 1.0 - h[a]);
    zhat[i] = c[1];
    for (std::size_t g = 0; g < 7; ++g) {
      R* row = &P[(g * K + i) * 3];
      for (int a = 0; a < 3; ++a) row[a] = static_cast<R>(c[a]);
      if (g > 0) {
        const std::size_t axis = (g - 1) / 2;
        const double sign = (g % 2 == 1) ? 1.0 : -1.0;
        row[axis] = static_cast<R>(c[axis] + sign * h[axis]);
      }
    }
  }
  const Tensor<R> Y = predict(P);
  if (Y.rank() != 2 || Y.dim(0) != 7 * K || Y.dim(1) < 5) {
    throw DimensionError("predict must return [" + std::to_string(7 * K) + ", 5], got " + ad::to_string(Y.shape()));
  }
  std::array<Tensor<R>, 7> G;
  for (std::size_t g = 0; g < 7; ++g) G[g] = ad::slice(Y, 0, g * K, (g + 1) * K);

  const auto& st = scales.stats;
  auto col = [&](std::size_t g, std::size_t c) { return ad::slice(G[g], 1, c, c + 1); };
  // Physical-unit factor of channel c (pressure has no mean).
  auto unit = [&](std::size_t c) { return c == 4 ? params.pressure_scale : static_cast<double>(st.std[c]); };
  auto value = [&](std::size_t c) {
    return ad::add_scalar(ad::scale(col(0, c), static_cast<R>(unit(c))), static_cast<R>(st.mean[c]));
  };
  auto d1 = [&](std::size_t c, std::size_t axis) {
    const double f = unit(c) / (2.0 * h[axis] * scales.extent[axis]);
    return ad::scale(ad::sub(col(1 + 2 * axis, c), col(2 + 2 * axis, c)), static_cast<R>(f));
  };
  auto d2 = [&](std::size_t c, std::size_t axis) {
    const double f = unit(c) / (h[axis] * h[axis] * scales.extent[axis] * scales.extent[axis]);
    const Tensor<R> s = ad::add(col(1 + 2 * axis, c), col(2 + 2 * axis, c));
    return ad::scale(ad::sub(s, ad::scale(col(0, c), R(2))), static_cast<R>(f));
  };
  constexpr std::size_t T = 0, S = 1, U = 2, W = 3, Pc = 4;
  constexpr std::size_t At = 0, Az = 1, Ax = 2;

  const Tensor<R> u = value(U), w = value(W);
  ResidualSet<R> out;

  auto momentum = [&](std::size_t c, std::size_t paxis, bool buoyant) {
    std::vector<Tensor<R>> terms = {d1(c, At), ad::mul(u, d1(c, Ax)), ad::mul(w, d1(c, Az)),
                                    ad::scale(d1(Pc, paxis), static_cast<R>(1.0 / params.rho0))};
    if (buoyant) {
      // g (rho - rho_bar) / rho0, split into the fields' part and a per-point constant.
      const double a = -params.g * params.alpha * st.std[T], b = params.g * params.beta * st.std[S];
      Tensor<R> c0({K, 1});
      const double base =
          params.g * (1.0 - params.alpha * (st.mean[T] - params.t0) + params.beta * (st.mean[S] - params.s0));
      for (std::size_t i = 0; i < K; ++i)
        c0[i] = static_cast<R>(base - params.g * scales.background_density(zhat[i], params) / params.rho0);
      terms.push_back(ad::add(ad::add(ad::scale(col(0, T), static_cast<R>(a)), ad::scale(col(0, S), static_cast<R>(b))), c0));
    }
    if (params.nu_h != 0) terms.push_back(ad::scale(d2(c, Ax), static_cast<R>(-params.nu_h)));
    if (params.nu_z != 0) terms.push_back(ad::scale(d2(c, Az), static_cast<R>(-params.nu_z)));
    return terms;
  };
  auto tracer = [&](std::size_t c, double kappa) {
    std::vector<Tensor<R>> terms = {d1(c, At), ad::mul(u, d1(c, Ax)), ad::mul(w, d1(c, Az))};
    if (kappa != 0) terms.push_back(ad::scale(ad::add(d2(c, Ax), d2(c, Az)), static_cast<R>(-kappa)));
    return terms;
  };

  const std::array<std::vector<Tensor<R>>, kNumEquations> eqs = {
      momentum(U, Ax, false), momentum(W, Az, true), std::vector<Tensor<R>>{d1(U, Ax), d1(W, Az)},
      tracer(T, params.kappa_t), tracer(S, params.kappa_s)};
  for (std::size_t e = 0; e < kNumEquations; ++e) {
    out.residual[e] = sum_terms(eqs[e]);
    out.scale[e] = rms_of_max(eqs[e]);
  }
  return out;
}

template <class R>
Tensor<R> pde_loss(const ResidualSet<R>& r) {
  return pde_loss(r, r.scale);
}

template <class R>
Tensor<R> pde_loss(const ResidualSet<R>& r, const std::array<double, kNumEquations>& scale) {
  Tensor<R> total;
  for (std::size_t e = 0; e < kNumEquations; ++e) {
    if (!(scale[e] > 0)) throw ConfigError("PDE scale of " + std::string(kEquationNames[e]) + " must be positive");
    const Tensor<R> term = ad::scale(ad::mean(ad::square(r.residual[e])), static_cast<R>(1.0 / (scale[e] * scale[e])));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

template <class R>
std::array<double, kNumEquations> pde_loss_terms(const ResidualSet<R>& r) {
  std::array<double, kNumEquations> out{};
  for (std::size_t e = 0; e < kNumEquations; ++e) {
    double ss = 0;
    for (R v : r.residual[e].data()) ss += static_cast<double>(v) * v;
    out[e] = ss / static_cast<double>(r.residual[e].numel()) / (r.scale[e] * r.scale[e]);
  }
  return out;
}

void LossConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("PDE weight gamma = " + std::to_string(gamma) + " is outside [0, 1]");
  if (!(lambda >= 0.0)) throw ConfigError("PDE multiplier lambda must be >= 0");
}

template <class R>
Tensor<R> regression_mse(const Tensor<R>& pred, const Tensor<R>& truth) {
  if (pred.rank() != 2 || truth.rank() != 2 || truth.dim(1) != 4 || pred.dim(1) < 4 || pred.dim(0) != truth.dim(0)) {
    throw DimensionError("regression_mse expects pred [N, >=4] and truth [N, 4], got " + ad::to_string(pred.shape()) +
                         " and " + ad::to_string(truth.shape()));
  }
  const Tensor<R> p = pred.dim(1) == 4 ? pred : ad::slice(pred, 1, 0, 4);
  return ad::mean(ad::square(ad::sub(p, truth)));
}

template <class R>
Tensor<R> total_loss(const Tensor<R>& mse, const Tensor<R>& pde, const LossConfig& cfg) {
  cfg.validate();
  if (!cfg.uses_pde()) return mse;
  if (!pde.defined()) throw ContractError("loss config weights the PDE term but no PDE loss was given");
  if (cfg.raw) return ad::add(mse, ad::scale(pde, static_cast<R>(cfg.lambda)));
  if (cfg.gamma == 1.0) return pde;
  return ad::add(ad::scale(pde, static_cast<R>(cfg.gamma)), ad::scale(mse, static_cast<R>(1.0 - cfg.gamma)));
}

#define IWSR_PHYSICS_INSTANTIATE(R)                                                                             \
  template ResidualSet<R> pde_residuals(const PredictFn<R>&, const Tensor<R>&, const StencilConfig&,           \
                                        const PhysParams&, const GridScales&);                                  \
  template Tensor<R> pde_loss(const ResidualSet<R>&);                                                           \
  template Tensor<R> pde_loss(const ResidualSet<R>&, const std::array<double, kNumEquations>&);                 \
  template std::array<double, kNumEquations> pde_loss_terms(const ResidualSet<R>&);                             \
  template Tensor<R> regression_mse(const Tensor<R>&, const Tensor<R>&);                                        \
  template Tensor<R> total_loss(const Tensor<R>&, const Tensor<R>&, const LossConfig&);

IWSR_PHYSICS_INSTANTIATE(float)
IWSR_PHYSICS_INSTANTIATE(double)

}  // namespace iwsr::physics
