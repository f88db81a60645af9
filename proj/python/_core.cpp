// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>

#include "iwsr/error.hpp"
#include "iwsr/field/grid_io.hpp"
#include "iwsr/field/preprocess.hpp"
#include "iwsr/field/render.hpp"
#include "iwsr/field/resample.hpp"
#include "iwsr/field/synthetic.hpp"
#include "iwsr/metrics/metrics.hpp"
#include "iwsr/parallel.hpp"
#include "iwsr/selftest.hpp"
#include "iwsr/train/trainer.hpp"

namespace py = pybind11;
using namespace iwsr;
using field::FieldGrid;
using field::Var;

namespace {

Var parse_var(const std::string& name) {
  for (std::size_t i = 0; i < field::kNumVars; ++i)
    if (field::kVarNames[i] == name) return static_cast<Var>(i);
  throw py::key_error("unknown variable '" + name + "' (expected T, S, u or w)");
}

py::array_t<float> var_array(const FieldGrid& g, const std::string& name) {
  const auto& v = g.var(parse_var(name));
  py::array_t<float> out({g.nt, g.nz, g.nx});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

void set_var(FieldGrid& g, const std::string& name, py::array_t<float, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 3 || std::size_t(a.shape(0)) != g.nt || std::size_t(a.shape(1)) != g.nz ||
      std::size_t(a.shape(2)) != g.nx)
    throw DimensionError("array shape must be (nt, nz, nx)");
  auto& v = g.var(parse_var(name));
  std::copy(a.data(), a.data() + a.size(), v.begin());
}

py::array_t<bool> terrain_array(const FieldGrid& g) {
  py::array_t<bool> out({g.nz, g.nx});
  std::transform(g.terrain.begin(), g.terrain.end(), out.mutable_data(), [](std::uint8_t c) { return c != 0; });
  return out;
}

FieldGrid from_arrays(py::dict fields, py::array_t<bool, py::array::c_style | py::array::forcecast> terrain, float dt,
                      float dz, float dx) {
  const auto t0 = fields["T"].cast<py::array_t<float, py::array::c_style | py::array::forcecast>>();
  if (t0.ndim() != 3) throw DimensionError("field arrays must be (nt, nz, nx)");
  FieldGrid g = FieldGrid::zeros(t0.shape(0), t0.shape(1), t0.shape(2), dt, dz, dx);
  using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
  for (auto name : field::kVarNames) {
    const std::string key(name);
    set_var(g, key, fields[py::str(key)].cast<FloatArray>());
  }
  if (terrain.ndim() != 2 || std::size_t(terrain.shape(0)) != g.nz || std::size_t(terrain.shape(1)) != g.nx)
    throw DimensionError("terrain must be (nz, nx)");
  for (std::size_t i = 0; i < g.plane(); ++i) g.terrain[i] = terrain.data()[i] ? 1 : 0;
  return g;
}

py::dict report_dict(const metrics::MetricReport& r) {
  py::dict d;
  for (std::size_t i = 0; i < field::kNumVars; ++i) {
    const std::string v(field::kVarNames[i]);
    d[py::str("psnr." + v)] = r.psnr[i].db;
    d[py::str("ssim." + v)] = r.ssim[i];
  }
  d["psnr_avg"] = r.psnr_avg;
  d["ssim_avg"] = r.ssim_avg;
  d["ke_error"] = r.ke.value;
  d["fft_mse"] = r.fft_mse;
  return d;
}

py::dict log_dict(const train::EpochLog& l) {
  py::dict d;
  d["epoch"] = l.epoch;
  d["loss"] = l.loss;
  d["pde"] = l.pde;
  d["mse"] = l.mse;
  d["edge_loss"] = l.edge_loss;
  d["random_loss"] = l.random_loss;
  d["edge_coef"] = l.edge_coef;
  d["next_edge_coef"] = l.next_edge_coef;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the iwsr super-resolution library";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<FieldGrid>(m, "Grid")
      .def_static("zeros", &FieldGrid::zeros, py::arg("nt"), py::arg("nz"), py::arg("nx"), py::arg("dt") = 1.f,
                  py::arg("dz") = 1.f, py::arg("dx") = 1.f)
      .def_static("from_arrays", &from_arrays, py::arg("fields"), py::arg("terrain"), py::arg("dt") = 1.f,
                  py::arg("dz") = 1.f, py::arg("dx") = 1.f)
      .def_property_readonly("shape", [](const FieldGrid& g) { return py::make_tuple(g.nt, g.nz, g.nx); })
      .def_readwrite("dt", &FieldGrid::dt)
      .def_readwrite("dz", &FieldGrid::dz)
      .def_readwrite("dx", &FieldGrid::dx)
      .def_readonly("terrain_filled", &FieldGrid::terrain_filled)
      .def_property_readonly("normalized", &FieldGrid::normalized)
      .def_property_readonly("terrain", &terrain_array)
      .def("var", &var_array, py::arg("name"))
      .def("set_var", &set_var, py::arg("name"), py::arg("values"))
      .def("__eq__", [](const FieldGrid& a, const FieldGrid& b) { return a == b; })
      .def("__repr__", [](const FieldGrid& g) {
        return "Grid(nt=" + std::to_string(g.nt) + ", nz=" + std::to_string(g.nz) + ", nx=" + std::to_string(g.nx) +
               ")";
      });

  m.def(
      "generate",
      [](std::size_t nt, std::size_t nz, std::size_t nx, const std::string& topo, double amplitude, double noise,
         std::uint64_t seed) {
        field::GenConfig gc;
        gc.nt = nt;
        gc.nz = nz;
        gc.nx = nx;
        gc.amplitude = amplitude;
        gc.noise = noise;
        gc.seed = seed;
        field::TopographyProfile tp;
        tp.kind = field::parse_topography(topo);
        return field::generate_synthetic(gc, tp);
      },
      py::arg("nt") = 64, py::arg("nz") = 64, py::arg("nx") = 256, py::arg("topo") = "sill",
      py::arg("amplitude") = 30.0, py::arg("noise") = 0.0, py::arg("seed") = 0);
  m.def("load_grid", &field::load_grid, py::arg("path"));
  m.def("save_grid", &field::save_grid, py::arg("grid"), py::arg("path"));
  m.def("continuity_rms", &field::continuity_rms, py::arg("grid"));
  m.def("terrain_fill", &field::terrain_fill, py::arg("grid"));
  m.def(
      "normalize", [](const FieldGrid& g) { return field::normalize(g).first; }, py::arg("grid"));
  m.def(
      "denormalize", [](const FieldGrid& g) { return field::denormalize(g); }, py::arg("grid"));
  m.def("downsample", &field::downsample, py::arg("grid"), py::arg("factors"));
  m.def("extract_patch", &field::extract_patch, py::arg("grid"), py::arg("origin"), py::arg("sizes"));
  m.def(
      "baseline_upsample",
      [](const FieldGrid& g, field::Factors f, const std::string& method) {
        return field::baseline_upsample(g, f, field::parse_upsample_method(method));
      },
      py::arg("grid"), py::arg("factors"), py::arg("method") = "trilinear");
  m.def(
      "render_slice_ppm",
      [](const FieldGrid& g, const std::string& var, std::size_t t) {
        const auto bytes = field::render_slice_ppm(g, parse_var(var), t);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("grid"), py::arg("var") = "u", py::arg("t") = 0);

  m.def(
      "psnr", [](const FieldGrid& p, const FieldGrid& t, const std::string& v) { return metrics::psnr(p, t, parse_var(v)).db; },
      py::arg("pred"), py::arg("truth"), py::arg("var"));
  m.def(
      "ssim", [](const FieldGrid& p, const FieldGrid& t, const std::string& v) { return metrics::ssim(p, t, parse_var(v)); },
      py::arg("pred"), py::arg("truth"), py::arg("var"));
  m.def(
      "fft_mse", [](const FieldGrid& p, const FieldGrid& t) { return metrics::fft_mse(p, t); }, py::arg("pred"),
      py::arg("truth"));
  m.def(
      "eval_report", [](const FieldGrid& p, const FieldGrid& t) { return report_dict(metrics::eval_report(p, t)); },
      py::arg("pred"), py::arg("truth"));

  py::class_<train::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_static("desk", &train::TrainConfig::desk)
      .def_readwrite("lr", &train::TrainConfig::lr)
      .def_readwrite("epochs", &train::TrainConfig::epochs)
      .def_readwrite("blocks_per_epoch", &train::TrainConfig::blocks_per_epoch)
      .def_readwrite("batch", &train::TrainConfig::batch)
      .def_readwrite("points", &train::TrainConfig::points)
      .def_readwrite("pde_points", &train::TrainConfig::pde_points)
      .def_readwrite("hr_block", &train::TrainConfig::hr_block)
      .def_readwrite("factors", &train::TrainConfig::factors)
      .def_readwrite("terrain_fill", &train::TrainConfig::terrain_fill)
      .def_readwrite("seed", &train::TrainConfig::seed)
      .def_property(
          "gamma", [](const train::TrainConfig& c) { return c.loss.gamma; },
          [](train::TrainConfig& c, double g) { c.loss.gamma = g; })
      .def_property(
          "edge_sampling", [](const train::TrainConfig& c) { return c.sampling.edge_enabled; },
          [](train::TrainConfig& c, bool on) { c.sampling.edge_enabled = on; })
      .def_property_readonly("lr_block", &train::TrainConfig::lr_block)
      .def("describe", &train::TrainConfig::describe);

  py::class_<model::ModelConfig>(m, "ModelConfig")
      .def_static("for_lr_block", &model::ModelConfig::for_lr_block, py::arg("lr_block"), py::arg("divisor") = 1)
      .def_property(
          "decoder_width", [](const model::ModelConfig& c) { return c.decoder.width; },
          [](model::ModelConfig& c, std::size_t w) { c.decoder.width = w; })
      .def_property(
          "decoder_depth", [](const model::ModelConfig& c) { return c.decoder.depth; },
          [](model::ModelConfig& c, std::size_t d) { c.decoder.depth = d; })
      .def_property(
          "fft", [](const model::ModelConfig& c) { return c.encoder.fft; },
          [](model::ModelConfig& c, bool on) { c.encoder.fft = on; })
      .def_property(
          "attention", [](const model::ModelConfig& c) { return c.encoder.attention; },
          [](model::ModelConfig& c, bool on) { c.encoder.attention = on; });

  py::class_<train::Checkpoint>(m, "Checkpoint")
      .def_readonly("epoch", &train::Checkpoint::epoch)
      .def_property_readonly("parameter_count",
                             [](const train::Checkpoint& c) {
                               std::size_t n = 0;
                               for (const auto& p : c.params) n += p.data.size();
                               return n;
                             })
      .def("save", [](const train::Checkpoint& c, const std::filesystem::path& p) { train::save_checkpoint(c, p); })
      .def_static("load", &train::load_checkpoint, py::arg("path"));

  m.def(
      "train",
      [](const FieldGrid& data, const model::ModelConfig& mc, const train::TrainConfig& tc) {
        std::vector<train::EpochLog> logs;
        train::Checkpoint ck;
        {
          py::gil_scoped_release release;
          ck = train::train(data, mc, tc, {}, &logs);
        }
        py::list out;
        for (const auto& l : logs) out.append(log_dict(l));
        return py::make_tuple(ck, out);
      },
      py::arg("data"), py::arg("model"), py::arg("config"));
  m.def(
      "super_resolve",
      [](const train::Checkpoint& ck, const FieldGrid& lr, ad::Triple f) {
        py::gil_scoped_release release;
        return train::super_resolve(ck, lr, f);
      },
      py::arg("checkpoint"), py::arg("lr"), py::arg("factors"));

  m.def("thread_count", &thread_count);
  m.def("set_thread_count", &set_thread_count, py::arg("n"));

  m.def(
      "gradient_check",
      [](std::size_t seeds) {
        const auto g = selftest::gradient_suite(seeds);
        return py::dict(py::arg("ops_error") = g.ops_error, py::arg("end_to_end_error") = g.end_to_end_error);
      },
      py::arg("seeds") = 5);
  m.def("fft_check", [] {
    const auto f = selftest::fft_suite();
    return py::dict(py::arg("roundtrip_max_error") = f.roundtrip_max_error,
                    py::arg("parseval_relative") = f.parseval_relative);
  });
}
