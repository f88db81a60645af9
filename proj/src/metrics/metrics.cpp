// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <string>

#include "iwsr/ad/fft.hpp"
#include "iwsr/error.hpp"
#include "iwsr/log.hpp"
#include "iwsr/parallel.hpp"

namespace iwsr::metrics {
namespace {

void check_sizes(std::span<const float> pred, std::span<const float> truth, std::span<const std::uint8_t> mask,
                 std::size_t nt, std::size_t nz, std::size_t nx) {
  if (pred.size() != nt * nz * nx || truth.size() != nt * nz * nx || mask.size() != nz * nx) {
    throw DimensionError("metric inputs do not match the (nt, nz, nx) = (" + std::to_string(nt) + ", " +
                         std::to_string(nz) + ", " + std::to_string(nx) + ") grid");
  }
}

std::size_t fluid_count(std::span<const std::uint8_t> mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{0}));
}

double truth_range(std::span<const float> truth, std::span<const std::uint8_t> mask) {
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  const std::size_t plane = mask.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (mask[i % plane]) continue;
    lo = std::min(lo, truth[i]);
    hi = std::max(hi, truth[i]);
  }
  return static_cast<double>(hi) - static_cast<double>(lo);
}

std::span<const float> values(const FieldGrid& g, Var v) { return g.var(v); }

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

Psnr psnr_from_mse(double mse, double range) {
  if (!(mse > 0)) return {kPsnrCap, true};
  return {std::min(kPsnrCap, 10.0 * std::log10(range * range / mse)), false};
}

Psnr psnr(std::span<const float> pred, std::span<const float> truth, std::span<const std::uint8_t> mask,
          std::size_t nt, std::size_t nz, std::size_t nx) {
  check_sizes(pred, truth, mask, nt, nz, nx);
  const std::size_t fluid = fluid_count(mask);
  if (fluid == 0 || nt == 0) throw DegenerateDomainError("PSNR needs at least one fluid cell");
  const std::size_t plane = mask.size();
  double se = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (mask[i % plane]) continue;
    const double d = static_cast<double>(pred[i]) - truth[i];
    se += d * d;
  }
  return psnr_from_mse(se / static_cast<double>(fluid * nt), truth_range(truth, mask));
}

Psnr psnr(const FieldGrid& pred, const FieldGrid& truth, Var v) {
  return psnr(values(pred, v), values(truth, v), truth.terrain, truth.nt, truth.nz, truth.nx);
}

double ssim(std::span<const float> pred, std::span<const float> truth, std::span<const std::uint8_t> mask,
            std::size_t nt, std::size_t nz, std::size_t nx, const SsimConfig& cfg) {
  check_sizes(pred, truth, mask, nt, nz, nx);
  if (fluid_count(mask) == 0 || nt == 0) throw DegenerateDomainError("SSIM needs at least one fluid cell");
  std::size_t win = cfg.window;
  const std::size_t fit = std::min(nz, nx);
  if (win > fit) {
    win = fit % 2 == 1 ? fit : fit - 1;
    warn("SSIM window " + std::to_string(cfg.window) + " exceeds the " + std::to_string(nz) + "x" +
         std::to_string(nx) + " slice; using " + std::to_string(win));
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(win / 2);
  std::vector<double> g(win);
  for (std::ptrdiff_t d = -half; d <= half; ++d) {
    g[static_cast<std::size_t>(d + half)] = std::exp(-0.5 * static_cast<double>(d * d) / (cfg.sigma * cfg.sigma));
  }
  double range = truth_range(truth, mask);
  if (!(range > 0)) range = 1.0;
  const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double c2 = (cfg.k2 * range) * (cfg.k2 * range);

  const std::ptrdiff_t Z = static_cast<std::ptrdiff_t>(nz), X = static_cast<std::ptrdiff_t>(nx);
  std::vector<double> per_time(nt, 0.0);
  parallel_for(nt, [&](std::size_t n) {
    const float* p = pred.data() + n * nz * nx;
    const float* t = truth.data() + n * nz * nx;
    double acc = 0;
    std::size_t windows = 0;
    for (std::ptrdiff_t z = 0; z < Z; ++z) {
      for (std::ptrdiff_t x = 0; x < X; ++x) {
        if (mask[static_cast<std::size_t>(z * X + x)]) continue;
        double sw = 0, sp = 0, st = 0, spp = 0, stt = 0, spt = 0;
        for (std::ptrdiff_t dz = -half; dz <= half; ++dz) {
          const std::ptrdiff_t zz = z + dz;
          if (zz < 0 || zz >= Z) continue;
          const double gz = g[static_cast<std::size_t>(dz + half)];
          for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
            const std::ptrdiff_t xx = x + dx;
            if (xx < 0 || xx >= X) continue;
            const std::size_t k = static_cast<std::size_t>(zz * X + xx);
            if (mask[k]) continue;
            const double w = gz * g[static_cast<std::size_t>(dx + half)];
            const double a = p[k], b = t[k];
            sw += w;
            sp += w * a;
            st += w * b;
            spp += w * a * a;
            stt += w * b * b;
            spt += w * a * b;
          }
        }
        const double mp = sp / sw, mt = st / sw;
        const double vp = std::max(0.0, spp / sw - mp * mp);
        const double vt = std::max(0.0, stt / sw - mt * mt);
        const double cov = spt / sw - mp * mt;
        acc += ((2 * mp * mt + c1) * (2 * cov + c2)) / ((mp * mp + mt * mt + c1) * (vp + vt + c2));
        ++windows;
      }
    }
    per_time[n] = acc / static_cast<double>(windows);
  });
  double total = 0;
  for (double v : per_time) total += v;
  return std::clamp(total / static_cast<double>(nt), -1.0, 1.0);
}

double ssim(const FieldGrid& pred, const FieldGrid& truth, Var v, const SsimConfig& cfg) {
  return ssim(values(pred, v), values(truth, v), truth.terrain, truth.nt, truth.nz, truth.nx, cfg);
}

KeError ke_error(const FieldGrid& pred, const FieldGrid& truth) {
  check_sizes(pred.var(Var::u), truth.var(Var::u), truth.terrain, truth.nt, truth.nz, truth.nx);
  check_sizes(pred.var(Var::w), truth.var(Var::w), truth.terrain, truth.nt, truth.nz, truth.nx);
  const std::size_t plane = truth.plane();
  double ep = 0, et = 0;
  for (std::size_t i = 0; i < truth.cells(); ++i) {
    if (truth.terrain[i % plane]) continue;
    const double up = pred.var(Var::u)[i], wp = pred.var(Var::w)[i];
    const double ut = truth.var(Var::u)[i], wt = truth.var(Var::w)[i];
    ep += 0.5 * (up * up + wp * wp);
    et += 0.5 * (ut * ut + wt * wt);
  }
  if (!(et > 0)) return {std::numeric_limits<double>::quiet_NaN(), true};
  return {std::abs(ep - et) / et, false};
}

double fft_mse(std::span<const float> pred, std::span<const float> truth, std::span<const std::uint8_t> mask,
               std::size_t nt, std::size_t nz, std::size_t nx) {
  check_sizes(pred, truth, mask, nt, nz, nx);
  const std::size_t fluid = fluid_count(mask);
  if (fluid == 0 || nt == 0) throw DegenerateDomainError("FFT-MSE needs at least one fluid cell");
  const std::size_t plane = nz * nx;

  // Fill terrain with per-time fluid means, and collect fluid moments.
  auto filled = [&](std::span<const float> src, double& mean, double& var) {
    std::vector<double> out(src.begin(), src.end());
    double s = 0, s2 = 0;
    for (std::size_t n = 0; n < nt; ++n) {
      double m = 0;
      for (std::size_t k = 0; k < plane; ++k) {
        if (mask[k]) continue;
        const double v = src[n * plane + k];
        m += v;
        s += v;
        s2 += v * v;
      }
      m /= static_cast<double>(fluid);
      for (std::size_t k = 0; k < plane; ++k) {
        if (mask[k]) out[n * plane + k] = m;
      }
    }
    const double count = static_cast<double>(fluid * nt);
    mean = s / count;
    var = std::max(0.0, s2 / count - mean * mean);
    return out;
  };
  double mp = 0, vp = 0, mt = 0, vt = 0;
  std::vector<double> a = filled(pred, mp, vp);
  std::vector<double> b = filled(truth, mt, vt);
  const double mean = 0.5 * (mp + mt);
  double scale = std::sqrt(0.5 * (vp + vt));
  if (!(scale > 0)) scale = 1.0;

  auto magnitude = [&](const std::vector<double>& src) {
    std::vector<fft::cplx> c(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) c[i] = (src[i] - mean) / scale;
    fft::dft3(c, nt, nz, nx, false);
    std::vector<double> m(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) m[i] = std::abs(c[i]);
    return m;
  };
  const std::vector<double> fa = magnitude(a);
  const std::vector<double> fb = magnitude(b);
  double se = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const double d = fa[i] - fb[i];
    se += d * d;
  }
  return se / static_cast<double>(fa.size());
}

double fft_mse(const FieldGrid& pred, const FieldGrid& truth) {
  double total = 0;
  for (std::size_t v = 0; v < kNumVars; ++v) {
    total += fft_mse(pred.vars[v], truth.vars[v], truth.terrain, truth.nt, truth.nz, truth.nx);
  }
  return total / static_cast<double>(kNumVars);
}

MetricReport eval_report(const FieldGrid& pred, const FieldGrid& truth, std::string grid_id, std::string model_id) {
  pred.validate();
  truth.validate();
  if (pred.nt != truth.nt || pred.nz != truth.nz || pred.nx != truth.nx) {
    throw DimensionError("prediction (" + std::to_string(pred.nt) + ", " + std::to_string(pred.nz) + ", " +
                         std::to_string(pred.nx) + ") and truth (" + std::to_string(truth.nt) + ", " +
                         std::to_string(truth.nz) + ", " + std::to_string(truth.nx) + ") shapes differ");
  }
  if (pred.terrain != truth.terrain) throw DimensionError("prediction and truth terrain masks differ");
  MetricReport r;
  r.grid_id = std::move(grid_id);
  r.model_id = std::move(model_id);
  for (std::size_t v = 0; v < kNumVars; ++v) {
    r.psnr[v] = psnr(pred, truth, static_cast<Var>(v));
    r.ssim[v] = ssim(pred, truth, static_cast<Var>(v));
    r.psnr_avg += r.psnr[v].db / kNumVars;
    r.ssim_avg += r.ssim[v] / kNumVars;
  }
  r.ke = ke_error(pred, truth);
  r.fft_mse = fft_mse(pred, truth);
  return r;
}

std::string MetricReport::to_text() const {
  std::string out;
  auto line = [&](const std::string& key, const std::string& value) { out += key + ": " + value + "\n"; };
  line("grid_id", grid_id);
  line("model_id", model_id);
  for (std::size_t v = 0; v < kNumVars; ++v) {
    const std::string name(field::kVarNames[v]);
    line("psnr." + name, fmt(psnr[v].db));
    line("psnr." + name + ".exact", psnr[v].exact ? "true" : "false");
    line("ssim." + name, fmt(ssim[v]));
  }
  line("psnr.avg", fmt(psnr_avg));
  line("ssim.avg", fmt(ssim_avg));
  line("ke_error", fmt(ke.value));
  line("ke_error.undefined", ke.undefined ? "true" : "false");
  line("fft_mse", fmt(fft_mse));
  return out;
}

std::string comparison_table(const std::vector<std::pair<std::string, MetricReport>>& columns) {
  constexpr int kLabel = 14;
  std::size_t width = 10;
  for (const auto& [name, _] : columns) width = std::max(width, name.size() + 2);
  const int w = static_cast<int>(width);
  std::string out;
  char buf[128];
  auto row = [&](const std::string& label, auto&& cell) {
    std::snprintf(buf, sizeof buf, "%-*s", kLabel, label.c_str());
    out += buf;
    for (const auto& [_, r] : columns) {
      std::snprintf(buf, sizeof buf, "%*s", w, cell(r).c_str());
      out += buf;
    }
    out += "\n";
  };
  std::snprintf(buf, sizeof buf, "%-*s", kLabel, "Metric");
  out += buf;
  for (const auto& [name, _] : columns) {
    std::snprintf(buf, sizeof buf, "%*s", w, name.c_str());
    out += buf;
  }
  out += "\n";
  auto num = [](double v, const char* f) {
    if (std::isnan(v)) return std::string("nan");
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return std::string(b);
  };
  for (std::size_t v = 0; v < kNumVars; ++v) {
    const std::string name(field::kVarNames[v]);
    row(name + " PSNR", [&](const MetricReport& r) { return num(r.psnr[v].db, "%.4f"); });
    row(name + " SSIM", [&](const MetricReport& r) { return num(r.ssim[v], "%.4f"); });
  }
  row("Avg. PSNR", [&](const MetricReport& r) { return num(r.psnr_avg, "%.4f"); });
  row("Avg. SSIM", [&](const MetricReport& r) { return num(r.ssim_avg, "%.4f"); });
  row("KE-Error", [&](const MetricReport& r) { return num(r.ke.value, "%.4f"); });
  row("FFT MSE", [&](const MetricReport& r) { return num(r.fft_mse, "%.4f"); });
  return out;
}

}  // namespace iwsr::metrics
