// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/train/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>

#include "iwsr/error.hpp"
#include "iwsr/field/preprocess.hpp"
#include "iwsr/field/resample.hpp"
#include "iwsr/log.hpp"
#include "iwsr/random.hpp"

namespace iwsr::train {

using ad::Tensor;
using field::FieldGrid;

// ------------------------------------------------------------------ config

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs = 20;
  c.blocks_per_epoch = 50;
  return c;
}

Triple TrainConfig::lr_block() const {
  return {hr_block[0] / factors[0], hr_block[1] / factors[1], hr_block[2] / factors[2]};
}

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (epochs == 0 || blocks_per_epoch == 0 || batch == 0 || points == 0) {
    throw ConfigError("epochs, blocks per epoch, batch and points must be positive");
  }
  loss.validate();
  phys.validate();
  for (int a = 0; a < 3; ++a) {
    if (factors[a] == 0 || hr_block[a] == 0) throw ConfigError("block sizes and factors must be positive");
    if (hr_block[a] % factors[a] != 0) {
      throw ConfigError("HR block (" + std::to_string(hr_block[0]) + ", " + std::to_string(hr_block[1]) + ", " +
                        std::to_string(hr_block[2]) + ") is not a multiple of the factors (" +
                        std::to_string(factors[0]) + ", " + std::to_string(factors[1]) + ", " +
                        std::to_string(factors[2]) + ")");
    }
  }
  sampling::SamplingConfig s = sampling;
  s.batch = points;
  s.validate();
}

std::string TrainConfig::describe() const {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "lr: %g\nepochs: %zu\nblocks_per_epoch: %zu\nbatch: %zu\npoints: %zu\ngamma: %g\npde_weight_raw: %s\n"
                "lambda: %g\nhr_block: %zu,%zu,%zu\nfactors: %zu,%zu,%zu\nedge_sampling: %s\nedge_coef: %g\n"
                "pde_points: %zu\nseed: %llu\n",
                lr, epochs, blocks_per_epoch, batch, points, loss.gamma, loss.raw ? "true" : "false", loss.lambda,
                hr_block[0], hr_block[1], hr_block[2], factors[0], factors[1], factors[2],
                sampling.edge_enabled ? "on" : "off", sampling.edge_fraction, pde_points,
                static_cast<unsigned long long>(seed));
  return buf;
}

std::string EpochLog::to_line() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "epoch=%zu loss=%.9g pde=%.9g mse=%.9g edge_loss=%.9g random_loss=%.9g a=%.9g next_a=%.9g", epoch,
                loss, pde, mse, edge_loss, random_loss, edge_coef, next_edge_coef);
  return buf;
}

// -------------------------------------------------------------- checkpoint

namespace {

// 64-bit words are stored as four 16-bit halves, each an exactly
// representable float, so doubles and seeds survive the float container.
NamedTensor pack_words(const std::string& name, const std::vector<std::uint64_t>& words) {
  NamedTensor t{name, {words.size(), 4}, {}};
  for (std::uint64_t w : words)
    for (int k = 0; k < 4; ++k) t.data.push_back(static_cast<float>((w >> (16 * k)) & 0xFFFFu));
  return t;
}

std::vector<std::uint64_t> unpack_words(const std::vector<NamedTensor>& tensors, const std::string& name,
                                        std::size_t min_count) {
  const NamedTensor* t = find_tensor(tensors, name);
  if (!t) throw MigrationError("checkpoint lacks tensor '" + name + "'");
  if (t->data.size() % 4 != 0 || t->data.size() / 4 < min_count) {
    throw MigrationError("checkpoint tensor '" + name + "' has " + std::to_string(t->data.size()) +
                         " values, expected at least " + std::to_string(4 * min_count));
  }
  std::vector<std::uint64_t> out(t->data.size() / 4, 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int k = 0; k < 4; ++k) out[i] |= static_cast<std::uint64_t>(t->data[4 * i + k]) << (16 * k);
  return out;
}

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }
double real(std::uint64_t w) { return std::bit_cast<double>(w); }

std::vector<std::uint64_t> sizes_words(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

std::vector<std::uint64_t> train_words(const TrainConfig& c) {
  return {bits(c.lr),
          c.epochs,
          c.blocks_per_epoch,
          c.batch,
          c.points,
          bits(c.loss.gamma),
          c.loss.raw,
          bits(c.loss.lambda),
          c.hr_block[0],
          c.hr_block[1],
          c.hr_block[2],
          c.factors[0],
          c.factors[1],
          c.factors[2],
          bits(c.sampling.density),
          bits(c.sampling.radius),
          bits(c.sampling.edge_fraction),
          bits(c.sampling.a_min),
          bits(c.sampling.a_max),
          c.sampling.edge_enabled,
          c.adapt_edge,
          c.pde_points,
          c.seed,
          bits(c.phys.nu_h),
          bits(c.phys.nu_z),
          bits(c.phys.kappa_t),
          bits(c.phys.kappa_s),
          bits(c.phys.pressure_scale),
          c.terrain_fill};
}

TrainConfig train_from_words(const std::vector<std::uint64_t>& w) {
  TrainConfig c;
  std::size_t i = 0;
  c.lr = real(w[i++]);
  c.epochs = w[i++];
  c.blocks_per_epoch = w[i++];
  c.batch = w[i++];
  c.points = w[i++];
  c.loss.gamma = real(w[i++]);
  c.loss.raw = w[i++] != 0;
  c.loss.lambda = real(w[i++]);
  for (auto& v : c.hr_block) v = w[i++];
  for (auto& v : c.factors) v = w[i++];
  c.sampling.density = real(w[i++]);
  c.sampling.radius = real(w[i++]);
  c.sampling.edge_fraction = real(w[i++]);
  c.sampling.a_min = real(w[i++]);
  c.sampling.a_max = real(w[i++]);
  c.sampling.edge_enabled = w[i++] != 0;
  c.adapt_edge = w[i++] != 0;
  c.pde_points = w[i++];
  c.seed = w[i++];
  c.phys.nu_h = real(w[i++]);
  c.phys.nu_z = real(w[i++]);
  c.phys.kappa_t = real(w[i++]);
  c.phys.kappa_s = real(w[i++]);
  c.phys.pressure_scale = real(w[i++]);
  c.terrain_fill = w[i++] != 0;
  return c;
}

constexpr std::size_t kTrainWords = 29;

}  // namespace

std::vector<NamedTensor> checkpoint_to_tensors(const Checkpoint& c) {
  std::vector<NamedTensor> out = c.params;
  {
    model::SuperResModel<float> shape_only(c.model);
    std::vector<NamedTensor> moments = c.adam.export_state(shape_only.parameters());
    out.insert(out.end(), moments.begin(), moments.end());
  }
  const auto& e = c.model.encoder;
  out.push_back(pack_words("config.encoder",
                           {e.in_channels, e.input_size[0], e.input_size[1], e.input_size[2], e.attention, e.fft,
                            static_cast<std::uint64_t>(e.block), e.skip_all_levels, e.seed}));
  out.push_back(pack_words("config.encoder.down", sizes_words(e.down)));
  out.push_back(pack_words("config.encoder.up", sizes_words(e.up)));
  const auto& d = c.model.decoder;
  out.push_back(pack_words("config.decoder", {d.latent_channels, d.depth, d.width, d.zero_head, d.seed}));
  out.push_back(pack_words("config.model", {c.model.cell_aligned}));
  out.push_back(pack_words("config.train", train_words(c.train)));
  out.push_back(pack_words("meta", {c.epoch, c.adam.step, bits(c.edge_coef), bits(c.edge_loss), bits(c.random_loss)}));
  NamedTensor norm{"norm", {2, field::kNumVars}, {}};
  norm.data.insert(norm.data.end(), c.stats.mean.begin(), c.stats.mean.end());
  norm.data.insert(norm.data.end(), c.stats.std.begin(), c.stats.std.end());
  out.push_back(std::move(norm));
  return out;
}

Checkpoint checkpoint_from_tensors(const std::vector<NamedTensor>& tensors) {
  Checkpoint c;
  const auto enc = unpack_words(tensors, "config.encoder", 9);
  auto& e = c.model.encoder;
  e.in_channels = enc[0];
  e.input_size = {enc[1], enc[2], enc[3]};
  e.attention = enc[4] != 0;
  e.fft = enc[5] != 0;
  e.block = static_cast<model::BlockKind>(enc[6]);
  e.skip_all_levels = enc[7] != 0;
  e.seed = enc[8];
  const auto down = unpack_words(tensors, "config.encoder.down", 2);
  const auto up = unpack_words(tensors, "config.encoder.up", 2);
  e.down.assign(down.begin(), down.end());
  e.up.assign(up.begin(), up.end());
  const auto dec = unpack_words(tensors, "config.decoder", 5);
  auto& d = c.model.decoder;
  d.latent_channels = dec[0];
  d.depth = dec[1];
  d.width = dec[2];
  d.zero_head = dec[3] != 0;
  d.seed = dec[4];
  c.model.cell_aligned = unpack_words(tensors, "config.model", 1)[0] != 0;
  c.train = train_from_words(unpack_words(tensors, "config.train", kTrainWords));
  const auto meta = unpack_words(tensors, "meta", 5);
  c.epoch = meta[0];
  c.edge_coef = real(meta[2]);
  c.edge_loss = real(meta[3]);
  c.random_loss = real(meta[4]);
  const NamedTensor* norm = find_tensor(tensors, "norm");
  if (!norm || norm->data.size() != 2 * field::kNumVars) throw MigrationError("checkpoint lacks tensor 'norm'");
  std::copy_n(norm->data.begin(), field::kNumVars, c.stats.mean.begin());
  std::copy_n(norm->data.begin() + field::kNumVars, field::kNumVars, c.stats.std.begin());

  model::SuperResModel<float> model(c.model);
  try {
    model.import_state(tensors);
  } catch (const FormatError& err) {
    throw MigrationError(std::string("checkpoint parameters do not match the stored model config: ") +
                         err.message());
  }
  c.params = model.export_state();
  c.adam = AdamState::import_state(tensors, model.parameters(), meta[1]);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_container(path, checkpoint_to_tensors(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_tensors(read_container(path)); }

// ----------------------------------------------------------------- trainer

namespace {

void require_normalized(const FieldGrid& g) {
  g.validate();
  if (!g.normalized()) throw OrderingError("training data must be normalized (terrain_fill, then normalize)");
}

// Trilinear interpolation of a grid at node-aligned unit-cube points.
std::vector<float> interpolate_grid(const FieldGrid& g, const std::vector<sampling::Point>& pts) {
  std::vector<float> out(pts.size() * field::kNumVars);
  const std::array<std::size_t, 3> n{g.nt, g.nz, g.nx};
  for (std::size_t p = 0; p < pts.size(); ++p) {
    std::array<std::size_t, 3> i0{}, i1{};
    std::array<double, 3> w{};
    for (int a = 0; a < 3; ++a) {
      const double pos = std::clamp(pts[p][a], 0.0, 1.0) * static_cast<double>(n[a] - 1);
      const double fl = std::min(std::floor(pos), static_cast<double>(n[a] > 1 ? n[a] - 2 : 0));
      i0[a] = static_cast<std::size_t>(fl);
      i1[a] = std::min(i0[a] + 1, n[a] - 1);
      w[a] = pos - fl;
    }
    for (std::size_t v = 0; v < field::kNumVars; ++v) {
      const auto& a = g.vars[v];
      double acc = 0;
      for (int c = 0; c < 8; ++c) {
        const std::size_t t = c & 4 ? i1[0] : i0[0];
        const std::size_t z = c & 2 ? i1[1] : i0[1];
        const std::size_t x = c & 1 ? i1[2] : i0[2];
        const double wt = (c & 4 ? w[0] : 1 - w[0]) * (c & 2 ? w[1] : 1 - w[1]) * (c & 1 ? w[2] : 1 - w[2]);
        acc += wt * a[g.index(t, z, x)];
      }
      out[p * field::kNumVars + v] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor<float> points_tensor(const std::vector<sampling::Point>& pts, std::size_t stride = 1) {
  std::vector<float> v;
  for (std::size_t i = 0; i < pts.size(); i += stride)
    for (int a = 0; a < 3; ++a) v.push_back(static_cast<float>(pts[i][a]));
  const std::size_t n = v.size() / 3;
  return Tensor<float>({n, 3}, std::move(v));
}

// Points whose stencil support (every lattice node the +-h evaluations
// interpolate from) lies in fluid, thinned by a stride to at most `limit`.
std::vector<sampling::Point> fluid_stencil_points(const FieldGrid& hr, const std::vector<sampling::Point>& pts,
                                                  const physics::StencilConfig& st, std::size_t limit) {
  auto clear = [&](const sampling::Point& p) {
    const double nz1 = double(hr.nz - 1), nx1 = double(hr.nx - 1);
    const auto lo = [](double v, double n1) { return std::size_t(std::clamp(std::floor(v * n1), 0.0, n1)); };
    const auto hi = [](double v, double n1) { return std::size_t(std::clamp(std::ceil(v * n1), 0.0, n1)); };
    for (std::size_t z = lo(p[1] - st.h[1], nz1); z <= hi(p[1] + st.h[1], nz1); ++z)
      for (std::size_t x = lo(p[2] - st.h[2], nx1); x <= hi(p[2] + st.h[2], nx1); ++x)
        if (hr.solid(z, x)) return false;
    return true;
  };
  std::vector<sampling::Point> ok;
  for (const auto& p : pts)
    if (clear(p)) ok.push_back(p);
  if (ok.size() <= limit) return ok;
  std::vector<sampling::Point> out;
  const std::size_t stride = ok.size() / limit;
  for (std::size_t i = 0; i < ok.size() && out.size() < limit; i += stride) out.push_back(ok[i]);
  return out;
}

field::Factors random_origin(Rng& rng, const FieldGrid& g, Triple block) {
  return {uniform_index(rng, g.nt - block[0] + 1), uniform_index(rng, g.nz - block[1] + 1),
          uniform_index(rng, g.nx - block[2] + 1)};
}

}  // namespace

std::array<double, physics::kNumEquations> reference_pde_scales(const FieldGrid& dataset, const TrainConfig& cfg) {
  constexpr std::size_t kBlocks = 16, kPoints = 256;
  constexpr std::uint64_t kStream = 0x5CA1E5ULL;
  std::array<double, physics::kNumEquations> acc{};
  std::size_t used = 0;
  const Triple hb = cfg.hr_block;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    const std::uint64_t seed = mix_seed(cfg.seed ^ kStream, b);
    Rng rng(seed);
    const FieldGrid hr = field::extract_patch(dataset, random_origin(rng, dataset, hb), hb);
    const FieldGrid lr = field::downsample(hr, cfg.factors);
    const sampling::SampleBatch batch = sampling::uniform_batch(sampling::extract_edges(hr), kPoints, mix_seed(seed, 1));
    const physics::StencilConfig stencil = physics::StencilConfig::for_lattice(hb[0], hb[1], hb[2]);
    std::vector<double> pv;
    for (const auto& p : fluid_stencil_points(hr, batch.points, stencil, kPoints)) pv.insert(pv.end(), p.begin(), p.end());
    if (pv.empty()) continue;
    const std::size_t np = pv.size() / 3;
    const Tensor<double> pts({np, 3}, std::move(pv));
    const Tensor<double> grid = model::grid_tensor<double>(hr);
    const physics::PredictFn<double> predict = [&](const Tensor<double>& q) {
      return ad::concat<double>({ad::trilinear_sample(grid, q), Tensor<double>({q.dim(0), 1}, 0.0)}, 1);
    };
    ad::NoGradGuard no_grad;
    const auto res = physics::pde_residuals<double>(predict, pts, stencil, cfg.phys,
                                                    physics::GridScales::from_lr(lr, cfg.factors, cfg.phys));
    ++used;
    for (std::size_t e = 0; e < physics::kNumEquations; ++e) acc[e] += res.scale[e] * res.scale[e];
  }
  for (double& v : acc) v = std::max(1e-8, used ? std::sqrt(v / double(used)) : 0.0);
  return acc;
}

Trainer::Trainer(const FieldGrid& dataset, const model::ModelConfig& model_cfg, const TrainConfig& cfg)
    : data_(dataset), cfg_(cfg), model_((cfg.validate(), model_cfg)) {
  require_normalized(dataset);
  if (model_cfg.encoder.input_size != cfg.lr_block()) {
    throw ConfigError("encoder input size does not match the LR block implied by hr_block / factors");
  }
  for (int a = 0; a < 3; ++a) {
    const std::size_t n = a == 0 ? dataset.nt : a == 1 ? dataset.nz : dataset.nx;
    if (cfg.hr_block[a] > n) throw ConfigError("HR block does not fit in the dataset");
  }
  adam_ = AdamState::zeros_like(model_.parameters());
  edge_coef_ = cfg.sampling.edge_fraction;
  if (cfg.loss.uses_pde()) pde_scales_ = reference_pde_scales(dataset, cfg);
}

Trainer::Trainer(const FieldGrid& dataset, const Checkpoint& ckpt, const TrainConfig& cfg, bool retain_adam)
    : Trainer(dataset, ckpt.model, cfg) {
  model_.import_state(ckpt.params);
  if (retain_adam) adam_ = ckpt.adam;
  epoch_ = ckpt.epoch;
  edge_coef_ = ckpt.edge_coef;
  edge_loss_ = ckpt.edge_loss;
  random_loss_ = ckpt.random_loss;
  if (!(dataset.norm == std::optional<field::NormStats>(ckpt.stats))) {
    warn("dataset normalization differs from the checkpoint statistics");
  }
}

Trainer::BlockResult Trainer::process_block(std::uint64_t block_index, double weight, bool backward) {
  const std::uint64_t seed = mix_seed(cfg_.seed, block_index);
  Rng rng(seed);
  const Triple hb = cfg_.hr_block;
  const FieldGrid hr = field::extract_patch(data_, random_origin(rng, data_, hb), hb);
  const FieldGrid lr = field::downsample(hr, cfg_.factors);

  sampling::SamplingConfig scfg = cfg_.sampling;
  scfg.batch = cfg_.points;
  scfg.edge_fraction = edge_coef_;
  if (scfg.radius == 0.0) scfg.radius = sampling::default_radius(hb[1], hb[2], cfg_.factors[1], cfg_.factors[2]);
  const sampling::EdgeSet edges = sampling::extract_edges(hr);
  const sampling::SampleBatch batch = sampling::assemble_batch(edges, scfg, mix_seed(seed, 1));

  const std::size_t n = batch.points.size();
  const Tensor<float> pts = points_tensor(batch.points);
  const Tensor<float> target({n, field::kNumVars}, interpolate_grid(hr, batch.points));

  const Tensor<float> latent = model_.encode(model::grid_tensor<float>(lr));
  const model::LatentMap map = model_.latent_map(hb, cfg_.factors);
  const Tensor<float> pred = model_.decode(latent, pts, map);
  const Tensor<float> mse = physics::regression_mse(pred, target);

  Tensor<float> pde;
  const physics::StencilConfig stencil = physics::StencilConfig::for_lattice(hb[0], hb[1], hb[2]);
  const std::vector<sampling::Point> pde_pts =
      cfg_.loss.uses_pde() ? fluid_stencil_points(hr, batch.points, stencil, cfg_.pde_points) : std::vector<sampling::Point>{};
  if (!pde_pts.empty()) {
    const physics::GridScales scales = physics::GridScales::from_lr(lr, cfg_.factors, cfg_.phys);
    const physics::PredictFn<float> predict = [&](const Tensor<float>& q) { return model_.decode(latent, q, map); };
    const auto res = physics::pde_residuals<float>(predict, points_tensor(pde_pts), stencil, cfg_.phys, scales);
    // Reference scale as a floor under the batch's own term magnitudes.
    std::array<double, physics::kNumEquations> sc = pde_scales_;
    for (std::size_t e = 0; e < sc.size(); ++e) sc[e] = std::max(sc[e], res.scale[e]);
    pde = physics::pde_loss(res, sc);
  } else if (cfg_.loss.uses_pde()) {
    pde = ad::scale(mse, 0.0f);  // no point clear of terrain
  }
  const Tensor<float> loss = physics::total_loss(mse, pde, cfg_.loss);

  BlockResult r;
  r.loss = loss.item();
  r.mse = mse.item();
  r.pde = pde.defined() ? pde.item() : 0.0;
  if (!std::isfinite(r.loss)) {
    throw NonFiniteLossError("non-finite loss (mse " + std::to_string(r.mse) + ", pde " + std::to_string(r.pde) +
                                 ") at block " + std::to_string(block_index) + ", block seed " + std::to_string(seed),
                             seed);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double se = 0;
    for (std::size_t v = 0; v < field::kNumVars; ++v) {
      const double d = static_cast<double>(pred[i * model::kDecoderOutputs + v]) - target[i * field::kNumVars + v];
      se += d * d / field::kNumVars;
    }
    if (batch.flags[i] == sampling::Provenance::edge) {
      r.edge_se += se;
      ++r.n_edge;
    } else {
      r.random_se += se;
      ++r.n_random;
    }
  }
  if (backward) ad::backward(ad::scale(loss, static_cast<float>(weight)));
  return r;
}

double Trainer::block_loss(std::uint64_t block_index) { return process_block(block_index, 1.0, false).loss; }

EpochLog Trainer::run_epoch() {
  EpochLog log;
  log.epoch = epoch_ + 1;
  log.edge_coef = edge_coef_;
  double edge_se = 0, random_se = 0;
  std::size_t n_edge = 0, n_random = 0;
  const std::size_t bpe = cfg_.blocks_per_epoch;
  const auto params = model_.parameters();
  for (std::size_t start = 0; start < bpe; start += cfg_.batch) {
    const std::size_t end = std::min(bpe, start + cfg_.batch);
    model_.zero_grad();
    for (std::size_t b = start; b < end; ++b) {
      const BlockResult r =
          process_block(static_cast<std::uint64_t>(epoch_) * bpe + b, 1.0 / static_cast<double>(end - start), true);
      log.loss += r.loss;
      log.pde += r.pde;
      log.mse += r.mse;
      edge_se += r.edge_se;
      random_se += r.random_se;
      n_edge += r.n_edge;
      n_random += r.n_random;
    }
    adam_step(params, adam_, cfg_.lr);
  }
  log.loss /= static_cast<double>(bpe);
  log.pde /= static_cast<double>(bpe);
  log.mse /= static_cast<double>(bpe);
  log.edge_loss = n_edge ? edge_se / static_cast<double>(n_edge) : 0.0;
  log.random_loss = n_random ? random_se / static_cast<double>(n_random) : 0.0;
  edge_loss_ = log.edge_loss;
  random_loss_ = log.random_loss;
  if (cfg_.adapt_edge && cfg_.sampling.edge_enabled && n_edge > 0 && n_random > 0) {
    edge_coef_ = sampling::update_edge_coefficient(edge_coef_, edge_loss_, random_loss_, cfg_.sampling.a_min,
                                                   cfg_.sampling.a_max);
  }
  log.next_edge_coef = edge_coef_;
  ++epoch_;
  return log;
}

std::vector<EpochLog> Trainer::run(const EpochCallback& on_epoch) {
  std::vector<EpochLog> logs;
  while (epoch_ < cfg_.epochs) {
    logs.push_back(run_epoch());
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.model = model_.config();
  c.train = cfg_;
  c.stats = *data_.norm;
  c.params = model_.export_state();
  c.adam = adam_;
  c.epoch = epoch_;
  c.edge_coef = edge_coef_;
  c.edge_loss = edge_loss_;
  c.random_loss = random_loss_;
  return c;
}

Checkpoint train(const FieldGrid& dataset, const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                 const EpochCallback& on_epoch, std::vector<EpochLog>* log) {
  Trainer t(dataset, model_cfg, cfg);
  auto logs = t.run(on_epoch);
  if (log) *log = std::move(logs);
  return t.checkpoint();
}

Checkpoint fine_tune(const Checkpoint& ckpt, const FieldGrid& dataset, const TrainConfig& cfg,
                     const FineTuneOptions& opts, const EpochCallback& on_epoch, std::vector<EpochLog>* log) {
  if (!(opts.lr_scale > 0)) throw ConfigError("fine-tune lr scale must be positive");
  TrainConfig c = cfg;
  c.lr = cfg.lr * opts.lr_scale;
  c.epochs = ckpt.epoch + (opts.epochs ? opts.epochs : cfg.epochs);
  Trainer t(dataset, ckpt, c, opts.retain_adam);
  auto logs = t.run(on_epoch);
  if (log) *log = std::move(logs);
  return t.checkpoint();
}

// --------------------------------------------------------------- inference

FieldGrid super_resolve(const model::SuperResModel<float>& model, const FieldGrid& lr, Triple f) {
  lr.validate();
  const Triple tile = model.config().encoder.input_size;
  const Triple n{lr.nt, lr.nz, lr.nx};
  for (int a = 0; a < 3; ++a) {
    if (f[a] == 0) throw ConfigError("factors must be positive");
    if (n[a] < tile[a]) {
      throw DimensionError("LR grid (" + std::to_string(n[0]) + ", " + std::to_string(n[1]) + ", " +
                           std::to_string(n[2]) + ") is smaller than the model tile (" + std::to_string(tile[0]) +
                           ", " + std::to_string(tile[1]) + ", " + std::to_string(tile[2]) + ")");
    }
  }
  FieldGrid hr = FieldGrid::zeros(n[0] * f[0], n[1] * f[1], n[2] * f[2], lr.dt / static_cast<float>(f[0]),
                                   lr.dz / static_cast<float>(f[1]), lr.dx / static_cast<float>(f[2]));
  for (std::size_t z = 0; z < hr.nz; ++z)
    for (std::size_t x = 0; x < hr.nx; ++x) hr.terrain[z * hr.nx + x] = lr.terrain[(z / f[1]) * lr.nx + x / f[2]];
  hr.norm = lr.norm;

  std::array<std::vector<std::size_t>, 3> starts;
  for (int a = 0; a < 3; ++a) {
    for (std::size_t s = 0; s + tile[a] < n[a]; s += tile[a]) starts[a].push_back(s);
    starts[a].push_back(n[a] - tile[a]);
  }
  const Triple hr_tile{tile[0] * f[0], tile[1] * f[1], tile[2] * f[2]};
  const model::LatentMap map = model.latent_map(hr_tile, f);
  auto coord = [](std::size_t i, std::size_t size) {
    return size > 1 ? static_cast<float>(static_cast<double>(i) / static_cast<double>(size - 1)) : 0.f;
  };

  ad::NoGradGuard no_grad;
  constexpr std::size_t kChunk = 4096;
  for (std::size_t it = 0; it < starts[0].size(); ++it)
    for (std::size_t iz = 0; iz < starts[1].size(); ++iz)
      for (std::size_t ix = 0; ix < starts[2].size(); ++ix) {
        const std::array<std::size_t, 3> idx{it, iz, ix};
        field::Factors origin{}, own_begin{}, own_end{};
        for (int a = 0; a < 3; ++a) {
          origin[a] = starts[a][idx[a]];
          // The last tile may overlap its neighbour; it keeps only the cells past it.
          own_begin[a] = idx[a] > 0 ? std::max(origin[a], starts[a][idx[a] - 1] + tile[a]) : origin[a];
          own_end[a] = origin[a] + tile[a];
        }
        const FieldGrid patch = field::extract_patch(lr, origin, tile);
        const Tensor<float> latent = model.encode(model::grid_tensor<float>(patch));
        std::vector<std::array<std::size_t, 3>> cells;
        for (std::size_t t = own_begin[0] * f[0]; t < own_end[0] * f[0]; ++t)
          for (std::size_t z = own_begin[1] * f[1]; z < own_end[1] * f[1]; ++z)
            for (std::size_t x = own_begin[2] * f[2]; x < own_end[2] * f[2]; ++x) cells.push_back({t, z, x});
        for (std::size_t c0 = 0; c0 < cells.size(); c0 += kChunk) {
          const std::size_t c1 = std::min(cells.size(), c0 + kChunk);
          std::vector<float> q;
          q.reserve(3 * (c1 - c0));
          for (std::size_t c = c0; c < c1; ++c)
            for (int a = 0; a < 3; ++a) q.push_back(coord(cells[c][a] - origin[a] * f[a], hr_tile[a]));
          const Tensor<float> out = model.decode(latent, Tensor<float>({c1 - c0, 3}, std::move(q)), map);
          for (std::size_t c = c0; c < c1; ++c) {
            const std::size_t i = hr.index(cells[c][0], cells[c][1], cells[c][2]);
            for (std::size_t v = 0; v < field::kNumVars; ++v)
              hr.vars[v][i] = out[(c - c0) * model::kDecoderOutputs + v];
          }
        }
      }
  return hr;
}

FieldGrid super_resolve(const Checkpoint& ckpt, const FieldGrid& lr, Triple factors) {
  model::SuperResModel<float> model(ckpt.model);
  model.import_state(ckpt.params);
  FieldGrid in = lr.normalized() ? field::denormalize(lr) : lr;
  if (ckpt.train.terrain_fill && !in.terrain_filled) in = field::terrain_fill(in);
  const FieldGrid hr = super_resolve(model, field::normalize_with(in, ckpt.stats), factors);
  return field::denormalize(hr);
}

}  // namespace iwsr::train
