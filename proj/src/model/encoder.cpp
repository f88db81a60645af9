// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/model/encoder.hpp"

#include <algorithm>
#include <limits>

#include "iwsr/error.hpp"

namespace iwsr::model {
namespace {

constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

std::size_t norm_groups(std::size_t channels, std::size_t requested) {
  if (requested) return requested;
  for (std::size_t g = std::min<std::size_t>(4, channels); g > 1; --g)
    if (channels % g == 0) return g;
  return 1;
}

std::string triple_str(Triple s) {
  return "(" + std::to_string(s[0]) + ", " + std::to_string(s[1]) + ", " + std::to_string(s[2]) + ")";
}

}  // namespace

template <class R>
Hfrb<R>::Hfrb(ParamList<R>& params, const std::string& name, const HfrbConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.in_channels == 0 || cfg.out_channels == 0) throw ConfigError("HFRB " + name + ": channels must be >= 1");
  const std::size_t ci = cfg.in_channels, co = cfg.out_channels;
  conv_ = Conv3d<R>(params, name + ".conv", ci, co, cfg.kernel, rng);
  norm_ = GroupNorm<R>(params, name + ".norm", co, norm_groups(co, cfg.groups));
  if (cfg.attention) {
    gate_ = Conv3d<R>(params, name + ".gate", ci, 1, 1, rng);
    gate_.zero();
  }
  if (cfg.fft) {
    fft_re_ = Conv3d<R>(params, name + ".fft_re", ci, co, 1, rng);
    fft_re_.zero();
    if (cfg.fft_imag) {
      fft_im_ = Conv3d<R>(params, name + ".fft_im", ci, co, 1, rng, false);
      fft_im_.zero();
    }
  }
  project_ = ci != co;
  if (project_) skip_ = Conv3d<R>(params, name + ".skip", ci, co, 1, rng);
}

template <class R>
Tensor<R> Hfrb<R>::operator()(const Tensor<R>& x) const {
  if (x.rank() != 4 || x.dim(0) != cfg_.in_channels) {
    throw DimensionError("HFRB expects [" + std::to_string(cfg_.in_channels) + ", T, Z, X], got " +
                         ad::to_string(x.shape()));
  }
  Tensor<R> body = ad::silu(norm_(conv_(x)));
  if (cfg_.attention) body = ad::mul(ad::sigmoid(gate_(x)), body);
  if (cfg_.fft) {
    const ad::ComplexPair<R> f = ad::fft3(x);
    Tensor<R> re = fft_re_(f.real);
    Tensor<R> im = cfg_.fft_imag ? fft_im_(f.imag) : Tensor<R>(re.shape());
    body = ad::add(body, ad::ifft3(ad::ComplexPair<R>{re, im}));
  }
  return ad::add(project_ ? skip_(x) : x, body);
}

template <class R>
ConvBlock<R>::ConvBlock(ParamList<R>& params, const std::string& name, std::size_t cin, std::size_t cout, Rng& rng) {
  conv_ = Conv3d<R>(params, name + ".conv", cin, cout, 3, rng);
  norm_ = GroupNorm<R>(params, name + ".norm", cout, norm_groups(cout, 0));
}

template <class R>
Tensor<R> ConvBlock<R>::operator()(const Tensor<R>& x) const {
  return ad::silu(norm_(conv_(x)));
}

Triple stage_factors(Triple size) {
  const std::size_t m = std::max({size[0], size[1], size[2]});
  if (m <= 1) throw ScheduleError("cannot halve a size-1 axis: sizes " + triple_str(size));
  if (m % 2) throw ScheduleError("cannot halve odd size " + std::to_string(m) + " in " + triple_str(size));
  Triple f{1, 1, 1};
  for (int a = 0; a < 3; ++a)
    if (size[a] == m) f[a] = 2;
  return f;
}

std::vector<Triple> down_schedule(Triple size, std::size_t stages) {
  std::vector<Triple> out;
  const Triple start = size;
  try {
    for (std::size_t s = 0; s < stages; ++s) {
      const Triple f = stage_factors(size);
      for (int a = 0; a < 3; ++a) size[a] /= f[a];
      out.push_back(f);
    }
  } catch (const ScheduleError& e) {
    throw ConfigError("input sizes " + triple_str(start) + " cannot be reduced in " + std::to_string(stages) +
                      " stages: " + e.what());
  }
  if (size != Triple{1, 1, 1}) {
    throw ConfigError("input sizes " + triple_str(start) + " reduce to " + triple_str(size) + " after " +
                      std::to_string(stages) + " stages, not 1x1x1");
  }
  return out;
}

template <class R>
Tensor<R> downsample_stage(const Tensor<R>& x, Triple factors) {
  return ad::avg_pool(x, factors);
}

template <class R>
Tensor<R> upsample_stage(const Tensor<R>& x, Triple factors) {
  return ad::nearest_upsample(x, factors);
}

void EncoderConfig::validate() const {
  if (in_channels == 0) throw ConfigError("encoder input channels must be >= 1");
  if (down.size() < 2) throw ConfigError("encoder needs at least two down blocks");
  if (up.size() != down.size()) {
    throw ConfigError("encoder ladder mismatch: " + std::to_string(down.size()) + " down blocks need as many up blocks, got " +
                      std::to_string(up.size()));
  }
  for (std::size_t c : down)
    if (c == 0) throw ConfigError("encoder channels must be >= 1");
  for (std::size_t c : up)
    if (c == 0) throw ConfigError("encoder channels must be >= 1");
  down_schedule(input_size, stages());
}

template <class R>
Encoder<R>::Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg.seed);
  const std::size_t n = cfg.down.size();
  std::vector<std::pair<std::size_t, std::size_t>> io;
  for (std::size_t i = 0; i < n; ++i) io.emplace_back(i == 0 ? cfg.in_channels : cfg.down[i - 1], cfg.down[i]);
  skip_source_.assign(n, kNoSkip);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t cin = j == 0 ? cfg.down[n - 1] : cfg.up[j - 1];
    if (j == n - 1) {
      skip_source_[j] = 0;
    } else if (cfg.skip_all_levels && j >= 1) {
      skip_source_[j] = n - j;
    }
    if (skip_source_[j] != kNoSkip) cin += cfg.down[skip_source_[j]];
    io.emplace_back(cin, cfg.up[j]);
  }
  // Lattice size each block runs at, to spot blocks with a real spectrum.
  const auto sched = down_schedule(cfg.input_size, cfg.stages());
  std::vector<Triple> level_size{cfg.input_size};
  for (const Triple& f : sched) {
    Triple s = level_size.back();
    for (int a = 0; a < 3; ++a) s[a] /= f[a];
    level_size.push_back(s);
  }
  auto block_level = [n](std::size_t b) -> std::size_t {
    if (b < 2) return 0;
    if (b < n) return b - 1;
    return n - 1 - (b - n);
  };
  for (std::size_t b = 0; b < io.size(); ++b) {
    const std::string name = "block" + std::to_string(b);
    const Triple s = level_size[block_level(b)];
    if (cfg.block == BlockKind::hfrb) {
      HfrbConfig h;
      h.in_channels = io[b].first;
      h.out_channels = io[b].second;
      h.attention = cfg.attention;
      h.fft = cfg.fft;
      h.fft_imag = s[0] > 2 || s[1] > 2 || s[2] > 2;
      hfrb_.emplace_back(params_, name, h, rng);
    } else {
      conv_.emplace_back(params_, name, io[b].first, io[b].second, rng);
    }
  }
}

template <class R>
Tensor<R> Encoder<R>::block(std::size_t i, const Tensor<R>& x) const {
  return cfg_.block == BlockKind::hfrb ? hfrb_[i](x) : conv_[i](x);
}

template <class R>
Tensor<R> Encoder<R>::operator()(const Tensor<R>& input, std::vector<StageTrace>* trace) const {
  if (input.rank() != 4 || input.dim(0) != cfg_.in_channels) {
    throw DimensionError("encoder expects [" + std::to_string(cfg_.in_channels) + ", T, Z, X], got " +
                         ad::to_string(input.shape()));
  }
  const std::size_t n = cfg_.down.size();
  const auto sched = down_schedule({input.dim(1), input.dim(2), input.dim(3)}, n - 1);
  auto run = [&](std::size_t b, const Tensor<R>& x, std::size_t out) {
    if (trace) trace->push_back({"HFRB", x.shape(), out});
    return block(b, x);
  };
  auto resample = [&](const char* op, const Tensor<R>& x, Triple f, bool down) {
    if (trace) trace->push_back({op, x.shape(), 0});
    return down ? downsample_stage(x, f) : upsample_stage(x, f);
  };

  std::vector<Tensor<R>> saved(n);
  Tensor<R> x = run(0, input, cfg_.down[0]);
  saved[0] = x;
  x = run(1, x, cfg_.down[1]);
  saved[1] = x;
  for (std::size_t i = 2; i < n; ++i) {
    x = resample("DownSamp", x, sched[i - 2], true);
    x = run(i, x, cfg_.down[i]);
    saved[i] = x;
  }
  x = resample("DownSamp", x, sched[n - 2], true);
  x = run(n, x, cfg_.up[0]);
  for (std::size_t j = 1; j < n; ++j) {
    x = resample("UpSamp", x, sched[n - 1 - j], false);
    if (skip_source_[j] != kNoSkip) x = ad::concat<R>({x, saved[skip_source_[j]]}, 0);
    x = run(n + j, x, cfg_.up[j]);
  }
  return x;
}

template <class R>
Tensor<R> grid_tensor(const field::FieldGrid& g) {
  Tensor<R> t({field::kNumVars, g.nt, g.nz, g.nx});
  auto d = t.data();
  for (std::size_t v = 0; v < field::kNumVars; ++v)
    std::transform(g.vars[v].begin(), g.vars[v].end(), d.begin() + v * g.cells(), [](float f) { return static_cast<R>(f); });
  return t;
}

template class Hfrb<float>;
template class Hfrb<double>;
template class ConvBlock<float>;
template class ConvBlock<double>;
template class Encoder<float>;
template class Encoder<double>;
template Tensor<float> downsample_stage(const Tensor<float>&, Triple);
template Tensor<double> downsample_stage(const Tensor<double>&, Triple);
template Tensor<float> upsample_stage(const Tensor<float>&, Triple);
template Tensor<double> upsample_stage(const Tensor<double>&, Triple);
template Tensor<float> grid_tensor(const field::FieldGrid&);
template Tensor<double> grid_tensor(const field::FieldGrid&);

}  // namespace iwsr::model
