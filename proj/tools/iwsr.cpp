// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

// iwsr: generate, train, super-resolve, evaluate, baseline, plot, selftest.
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "iwsr/error.hpp"
#include "iwsr/field/grid_io.hpp"
#include "iwsr/field/preprocess.hpp"
#include "iwsr/field/render.hpp"
#include "iwsr/field/resample.hpp"
#include "iwsr/field/synthetic.hpp"
#include "iwsr/log.hpp"
#include "iwsr/metrics/metrics.hpp"
#include "iwsr/parallel.hpp"
#include "iwsr/selftest.hpp"
#include "iwsr/train/trainer.hpp"

namespace {

using namespace iwsr;
using field::FieldGrid;

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ad::Triple parse_triple(const std::string& text, const char* flag) {
  ad::Triple out{};
  std::size_t pos = 0;
  for (int a = 0; a < 3; ++a) {
    const std::size_t comma = text.find(',', pos);
    if ((a < 2) != (comma != std::string::npos)) throw UsageError(std::string(flag) + " expects t,z,x");
    const std::string part = text.substr(pos, a < 2 ? comma - pos : std::string::npos);
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument(part);
      out[a] = static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw UsageError(std::string(flag) + " expects three positive integers, got '" + text + "'");
    }
    pos = comma + 1;
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

// ------------------------------------------------------------------ generate

struct GenerateArgs {
  std::string out, lr_out, factors = "4,8,4", topo = "flat";
  field::GenConfig cfg;
};

int run_generate(const GenerateArgs& a) {
  field::GenConfig cfg = a.cfg;
  field::TopographyProfile topo;
  topo.kind = field::parse_topography(a.topo);
  const FieldGrid g = field::generate_synthetic(cfg, topo);
  field::save_grid(g, a.out);
  float max_u = 0;
  for (float v : g.var(field::Var::u)) max_u = std::max(max_u, std::abs(v));
  std::printf("grid: %zu x %zu x %zu\n", g.nt, g.nz, g.nx);
  std::printf("continuity_rms: %.6e\n", field::continuity_rms(g));
  std::printf("max_abs_u: %.6g\n", double(max_u));
  if (!a.lr_out.empty()) {
    const FieldGrid lr = field::downsample(field::terrain_fill(g), parse_triple(a.factors, "--factors"));
    field::save_grid(lr, a.lr_out);
    std::printf("lr_grid: %zu x %zu x %zu\n", lr.nt, lr.nz, lr.nx);
  }
  return 0;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out, log, hr_block = "16,128,128", factors = "4,8,4";
  bool desk = false, deterministic = false;
  bool no_edge = false, no_fft = false, no_attention = false, no_terrain_fill = false;
  std::size_t divisor = 1, decoder_width = 128, decoder_depth = 6;
  train::TrainConfig cfg;
  double pde_weight_raw = 0;
};

int run_train(TrainArgs a, const CLI::App& cmd) {
  train::TrainConfig cfg = a.desk ? train::TrainConfig::desk() : train::TrainConfig{};
  // Explicit flags override the preset.
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--epochs")) cfg.epochs = a.cfg.epochs;
  if (given("--blocks-per-epoch")) cfg.blocks_per_epoch = a.cfg.blocks_per_epoch;
  if (given("--lr")) cfg.lr = a.cfg.lr;
  if (given("--batch")) cfg.batch = a.cfg.batch;
  if (given("--points")) cfg.points = a.cfg.points;
  if (given("--pde-points")) cfg.pde_points = a.cfg.pde_points;
  if (given("--gamma")) cfg.loss.gamma = a.cfg.loss.gamma;
  if (given("--edge-coef")) cfg.sampling.edge_fraction = a.cfg.sampling.edge_fraction;
  if (given("--seed")) cfg.seed = a.cfg.seed;
  if (given("--pde-weight-raw")) {
    cfg.loss.raw = true;
    cfg.loss.lambda = a.pde_weight_raw;
  }
  cfg.hr_block = parse_triple(a.hr_block, "--hr-block");
  cfg.factors = parse_triple(a.factors, "--factors");
  cfg.sampling.edge_enabled = !a.no_edge;
  cfg.terrain_fill = !a.no_terrain_fill;
  cfg.validate();
  if (a.deterministic) set_thread_count(1);

  FieldGrid data = field::load_grid(a.data);
  if (!data.normalized()) {
    data = cfg.terrain_fill ? field::normalize(field::terrain_fill(data)).first : field::normalize_unfilled(data).first;
  }
  model::ModelConfig mc = model::ModelConfig::for_lr_block(cfg.lr_block(), a.divisor);
  mc.encoder.fft = !a.no_fft;
  mc.encoder.attention = !a.no_attention;
  mc.decoder.width = a.decoder_width;
  mc.decoder.depth = a.decoder_depth;

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + log_path);
  std::string header = cfg.describe();
  header += "ladder_divisor: " + std::to_string(a.divisor) + "\nfft: " + (mc.encoder.fft ? "on" : "off") +
            "\nattention: " + (mc.encoder.attention ? "on" : "off") + "\nterrain_fill: " +
            (cfg.terrain_fill ? "on" : "off") + "\n";
  std::fputs(header.c_str(), stdout);
  log << header;

  train::Trainer trainer(data, mc, cfg);
  std::printf("parameters: %zu\n", trainer.model().parameter_count());
  std::fflush(stdout);
  trainer.run([&](const train::EpochLog& l) {
    const std::string line = l.to_line();
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    log << line << '\n';
    log.flush();
  });
  train::save_checkpoint(trainer.checkpoint(), a.out);
  return 0;
}

// --------------------------------------------------------- superres / eval

int run_superres(const std::string& ckpt_path, const std::string& in, const std::string& factors,
                 const std::string& out) {
  const train::Checkpoint ckpt = train::load_checkpoint(ckpt_path);
  const FieldGrid lr = field::load_grid(in);
  const FieldGrid hr = train::super_resolve(ckpt, lr, parse_triple(factors, "--factors"));
  for (const auto& v : hr.vars)
    for (float x : v)
      if (!std::isfinite(x)) throw RangeError("super-resolved grid holds non-finite values");
  field::save_grid(hr, out);
  std::printf("output: %zu x %zu x %zu\n", hr.nt, hr.nz, hr.nx);
  return 0;
}

int run_eval(const std::string& pred_path, const std::string& truth_path, const std::string& report,
             const std::string& grid_id, const std::string& model_id) {
  FieldGrid pred = field::load_grid(pred_path);
  FieldGrid truth = field::load_grid(truth_path);
  if (pred.normalized()) pred = field::denormalize(pred);
  if (truth.normalized()) truth = field::denormalize(truth);
  if (pred.nt == truth.nt && pred.nz == truth.nz && pred.nx == truth.nx && pred.terrain != truth.terrain) {
    warn("prediction terrain mask differs from the truth; using the truth mask");
    pred.terrain = truth.terrain;
  }
  const metrics::MetricReport r = metrics::eval_report(pred, truth, grid_id, model_id);
  const std::string text = r.to_text();
  std::fputs(text.c_str(), stdout);
  if (!report.empty()) write_text(report, text);
  return 0;
}

int run_baseline(const std::string& in, const std::string& factors, const std::string& method,
                 const std::string& out) {
  FieldGrid lr = field::load_grid(in);
  if (lr.normalized()) lr = field::denormalize(lr);
  if (!lr.terrain_filled) lr = field::terrain_fill(lr);
  const FieldGrid hr =
      field::baseline_upsample(lr, parse_triple(factors, "--factors"), field::parse_upsample_method(method));
  field::save_grid(hr, out);
  std::printf("output: %zu x %zu x %zu\n", hr.nt, hr.nz, hr.nx);
  return 0;
}

int run_plot(const std::string& in, const std::string& var, std::size_t t, const std::string& out) {
  const FieldGrid g = field::load_grid(in);
  const auto it = std::find(field::kVarNames.begin(), field::kVarNames.end(), var);
  const auto img = field::render_slice_ppm(g, field::Var(it - field::kVarNames.begin()), t);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out);
  f.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  return 0;
}

int run_selftest() {
  bool ok = true;
  auto line = [&](const char* name, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    ok = ok && pass;
  };
  char buf[256];
  const auto g = selftest::gradient_suite(5);
  std::snprintf(buf, sizeof buf, "ops %.3g, end-to-end %.3g over %zu seeds", g.ops_error, g.end_to_end_error, g.seeds);
  line("gradients", g.ops_error <= 1e-6 && g.end_to_end_error <= 1e-5, buf);
  const auto f = selftest::fft_suite();
  std::snprintf(buf, sizeof buf, "round trip %.3g, Parseval %.3g", f.roundtrip_max_error, f.parseval_relative);
  line("fft", f.roundtrip_max_error <= 1e-5 && f.parseval_relative <= 1e-4, buf);
  const auto c = selftest::continuity_suite();
  std::snprintf(buf, sizeof buf, "refinement ratio %.3f, linear field %.3g", c.ratio, c.linear_residual);
  line("continuity", c.ratio >= 3 && c.ratio <= 5 && c.linear_residual <= 1e-6, buf);
  return ok ? 0 : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iwsr: physics-informed super-resolution of internal-wave fields"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic internal-wave grid");
  g->add_option("--out", gen.out, "Output grid")->required();
  g->add_option("--nt", gen.cfg.nt, "Time steps")->capture_default_str();
  g->add_option("--nz", gen.cfg.nz, "Vertical cells")->capture_default_str();
  g->add_option("--nx", gen.cfg.nx, "Horizontal cells")->capture_default_str();
  g->add_option("--amplitude", gen.cfg.amplitude, "Wave amplitude (m)")->capture_default_str();
  g->add_option("--topo", gen.topo, "Topography")->check(CLI::IsMember({"flat", "sill", "slope"}))->capture_default_str();
  g->add_option("--noise", gen.cfg.noise, "Noise std as a fraction of each variable's std")->capture_default_str();
  g->add_option("--seed", gen.cfg.seed, "Noise seed")->capture_default_str();
  g->add_option("--lr-out", gen.lr_out, "Also write the terrain-filled, downsampled grid");
  g->add_option("--factors", gen.factors, "Downsampling factors t,z,x for --lr-out")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--data", tr.data, "Training grid")->required();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--log", tr.log, "Epoch log path (default <out>.log)");
  t->add_flag("--desk", tr.desk, "Start from the desk preset (20 epochs of 50 blocks)");
  t->add_option("--epochs", tr.cfg.epochs, "Epochs")->capture_default_str();
  t->add_option("--blocks-per-epoch", tr.cfg.blocks_per_epoch, "Blocks per epoch")->capture_default_str();
  t->add_option("--lr", tr.cfg.lr, "Learning rate")->capture_default_str();
  t->add_option("--batch", tr.cfg.batch, "Blocks per optimizer step")->capture_default_str();
  t->add_option("--points", tr.cfg.points, "Query points per block")->capture_default_str();
  t->add_option("--pde-points", tr.cfg.pde_points, "Points per block entering the PDE term")->capture_default_str();
  t->add_option("--gamma", tr.cfg.loss.gamma, "PDE weight")->capture_default_str();
  t->add_option("--pde-weight-raw", tr.pde_weight_raw, "Use mse + LAMBDA * pde instead of gamma");
  t->add_option("--edge-coef", tr.cfg.sampling.edge_fraction, "Initial edge coefficient a")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "Seed")->capture_default_str();
  t->add_option("--hr-block", tr.hr_block, "HR block t,z,x")->capture_default_str();
  t->add_option("--factors", tr.factors, "LR factors t,z,x")->capture_default_str();
  t->add_option("--divisor", tr.divisor, "Divide every encoder width by this")->capture_default_str();
  t->add_option("--decoder-width", tr.decoder_width, "Decoder width")->capture_default_str();
  t->add_option("--decoder-depth", tr.decoder_depth, "Decoder depth")->capture_default_str();
  t->add_flag("--no-edge", tr.no_edge, "Uniform sampling only");
  t->add_flag("--no-fft", tr.no_fft, "Drop the spectral branch");
  t->add_flag("--no-attention", tr.no_attention, "Drop the attention gate");
  t->add_flag("--no-terrain-fill", tr.no_terrain_fill, "Normalise without filling terrain");
  t->add_flag("--deterministic", tr.deterministic, "Single-threaded kernels");

  std::string ckpt, in, out, factors = "4,8,4";
  auto* s = app.add_subcommand("superres", "Super-resolve an LR grid with a checkpoint");
  s->add_option("--ckpt", ckpt, "Checkpoint")->required();
  s->add_option("--in", in, "LR grid")->required();
  s->add_option("--factors", factors, "Factors t,z,x")->capture_default_str();
  s->add_option("--out", out, "HR grid")->required();

  std::string pred, truth, report, grid_id = "grid", model_id = "model";
  auto* e = app.add_subcommand("eval", "Compare a prediction against the truth");
  e->add_option("--pred", pred, "Predicted grid")->required();
  e->add_option("--truth", truth, "Truth grid")->required();
  e->add_option("--report", report, "Report path");
  e->add_option("--grid-id", grid_id)->capture_default_str();
  e->add_option("--model-id", model_id)->capture_default_str();

  std::string method = "trilinear";
  auto* b = app.add_subcommand("baseline", "Interpolate an LR grid to HR");
  b->add_option("--in", in, "LR grid")->required();
  b->add_option("--factors", factors, "Factors t,z,x")->capture_default_str();
  b->add_option("--method", method, "trilinear or cubic")
      ->check(CLI::IsMember({"trilinear", "cubic"}))
      ->capture_default_str();
  b->add_option("--out", out, "HR grid")->required();

  std::string var = "u";
  std::size_t index = 0;
  auto* p = app.add_subcommand("plot", "Render one (z, x) slice as PPM");
  p->add_option("--in", in, "Grid")->required();
  p->add_option("--var", var, "Variable")->check(CLI::IsMember({"T", "S", "u", "w"}))->capture_default_str();
  p->add_option("--t", index, "Time index")->capture_default_str();
  p->add_option("--out", out, "PPM path")->required();

  auto* st = app.add_subcommand("selftest", "Gradient, FFT and continuity checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kUsageError;
  }

  try {
    if (g->parsed()) return run_generate(gen);
    if (t->parsed()) return run_train(tr, *t);
    if (s->parsed()) return run_superres(ckpt, in, factors, out);
    if (e->parsed()) return run_eval(pred, truth, report, grid_id, model_id);
    if (b->parsed()) return run_baseline(in, factors, method, out);
    if (p->parsed()) return run_plot(in, var, index, out);
    if (st->parsed()) return run_selftest();
  } catch (const UsageError& ex) {
    std::fprintf(stderr, "usage error: %s\n", ex.what());
    return kUsageError;
  } catch (const NonFiniteLossError& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kRuntimeError;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kRuntimeError;
  }
  return kUsageError;
}
