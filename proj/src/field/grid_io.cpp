// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/field/grid_io.hpp"

#include <string>

#include "iwsr/error.hpp"

namespace iwsr::field {
namespace {

[[noreturn]] void schema_error(const std::string& what) {
  // Schema problems are not tied to one byte; report the start of the body.
  throw FormatError("grid container: " + what, 8);
}

const NamedTensor& require(const std::vector<NamedTensor>& ts, std::string_view name, std::size_t rank) {
  const NamedTensor* t = find_tensor(ts, name);
  if (!t) schema_error("missing tensor \"" + std::string(name) + "\"");
  if (t->dims.size() != rank) {
    schema_error("tensor \"" + std::string(name) + "\" has rank " + std::to_string(t->dims.size()) + ", expected " +
                 std::to_string(rank));
  }
  return *t;
}

}  // namespace

std::vector<NamedTensor> grid_to_tensors(const FieldGrid& g) {
  g.validate();
  std::vector<NamedTensor> ts;
  for (std::size_t v = 0; v < kNumVars; ++v) ts.push_back({std::string(kVarNames[v]), {g.nt, g.nz, g.nx}, g.vars[v]});
  NamedTensor terrain{"terrain", {g.nz, g.nx}, {}};
  terrain.data.reserve(g.plane());
  for (auto m : g.terrain) terrain.data.push_back(m ? 1.f : 0.f);
  ts.push_back(std::move(terrain));
  NamedTensor meta{"meta", {}, {g.dt, g.dz, g.dx}};
  if (g.norm) {
    meta.data.insert(meta.data.end(), g.norm->mean.begin(), g.norm->mean.end());
    meta.data.insert(meta.data.end(), g.norm->std.begin(), g.norm->std.end());
  }
  meta.dims = {meta.data.size()};
  ts.push_back(std::move(meta));
  ts.push_back({"flags", {1}, {g.terrain_filled ? 1.f : 0.f}});
  return ts;
}

FieldGrid grid_from_tensors(const std::vector<NamedTensor>& ts) {
  const NamedTensor& t0 = require(ts, kVarNames[0], 3);
  FieldGrid g;
  g.nt = t0.dims[0];
  g.nz = t0.dims[1];
  g.nx = t0.dims[2];
  for (std::size_t v = 0; v < kNumVars; ++v) {
    const NamedTensor& t = require(ts, kVarNames[v], 3);
    if (t.dims != t0.dims) schema_error("variable \"" + t.name + "\" shape differs from \"T\"");
    g.vars[v] = t.data;
  }
  const NamedTensor& terrain = require(ts, "terrain", 2);
  if (terrain.dims[0] != g.nz || terrain.dims[1] != g.nx) schema_error("terrain shape is not (nz, nx)");
  g.terrain.reserve(g.plane());
  for (float m : terrain.data) {
    if (m != 0.f && m != 1.f) schema_error("terrain values must be 0 or 1");
    g.terrain.push_back(m != 0.f ? 1 : 0);
  }
  const NamedTensor& meta = require(ts, "meta", 1);
  if (meta.data.size() != 3 && meta.data.size() != 11) schema_error("meta must hold 3 or 11 values");
  g.dt = meta.data[0];
  g.dz = meta.data[1];
  g.dx = meta.data[2];
  if (meta.data.size() == 11) {
    NormStats s;
    for (std::size_t v = 0; v < kNumVars; ++v) {
      s.mean[v] = meta.data[3 + v];
      s.std[v] = meta.data[7 + v];
    }
    g.norm = s;
  }
  if (const NamedTensor* flags = find_tensor(ts, "flags"); flags && !flags->data.empty()) {
    g.terrain_filled = flags->data[0] != 0.f;
  }
  return g;
}

void save_grid(const FieldGrid& grid, const std::filesystem::path& path) {
  write_container(path, grid_to_tensors(grid));
}

FieldGrid load_grid(const std::filesystem::path& path) { return grid_from_tensors(read_container(path)); }

}  // namespace iwsr::field
