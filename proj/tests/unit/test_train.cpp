// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>

#include "iwsr/error.hpp"
#include "iwsr/field/preprocess.hpp"
#include "iwsr/field/resample.hpp"
#include "iwsr/field/synthetic.hpp"
#include "iwsr/train/trainer.hpp"

using namespace iwsr;
using ad::Tensor;
using field::FieldGrid;

namespace {

FieldGrid tiny_dataset() {
  field::GenConfig gc;
  gc.nt = 16;
  gc.nz = 32;
  gc.nx = 64;
  gc.seed = 5;
  field::TopographyProfile topo;
  topo.kind = field::TopographyKind::sill;
  return field::normalize(field::terrain_fill(field::generate_synthetic(gc, topo))).first;
}

train::TrainConfig tiny_train(double gamma) {
  train::TrainConfig c;
  c.epochs = 2;
  c.blocks_per_epoch = 4;
  c.batch = 2;
  c.points = 96;
  c.pde_points = 24;
  c.hr_block = {8, 16, 32};
  c.factors = {2, 4, 4};
  c.loss.gamma = gamma;
  c.seed = 3;
  return c;
}

model::ModelConfig tiny_model(const train::TrainConfig& tc) {
  model::ModelConfig m = model::ModelConfig::for_lr_block(tc.lr_block(), 4);
  m.decoder.width = 16;
  m.decoder.depth = 2;
  return m;
}

std::vector<std::string> log_lines(const std::vector<train::EpochLog>& logs) {
  std::vector<std::string> out;
  for (const auto& l : logs) out.push_back(l.to_line());
  return out;
}

}  // namespace

TEST_CASE("adam: one step from a known gradient") {
  Tensor<double> w({1}, std::vector<double>{1.0});
  w.set_requires_grad();
  w.mutable_grad()[0] = 2.0;
  std::vector<model::NamedParam<double>> params{{"w", w}};
  train::AdamState st = train::AdamState::zeros_like(params);
  train::adam_step(params, st, 0.1);
  // m_hat = 2 and v_hat = 4 after bias correction, so the step is lr * 2 / 2.
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(st.step == 1);
  CHECK(st.m[0][0] == doctest::Approx(0.2));
  CHECK(st.v[0][0] == doctest::Approx(0.004));
}

TEST_CASE("adam: zero gradient leaves weights alone, symmetric weights stay equal") {
  Tensor<double> a({3}, std::vector<double>{0.5, -1.0, 2.0});
  Tensor<double> b({2}, std::vector<double>{0.25, 0.25});
  a.set_requires_grad();
  b.set_requires_grad();
  b.mutable_grad()[0] = 0.3;
  b.mutable_grad()[1] = 0.3;
  std::vector<model::NamedParam<double>> params{{"a", a}, {"b", b}};
  train::AdamState st = train::AdamState::zeros_like(params);
  for (int i = 0; i < 3; ++i) train::adam_step(params, st, 0.01);
  CHECK(st.step == 3);
  CHECK(a[0] == 0.5);
  CHECK(a[1] == -1.0);
  CHECK(a[2] == 2.0);
  CHECK(b[0] == b[1]);
  CHECK(b[0] < 0.25);
}

TEST_CASE("adam: state import reports missing moments") {
  Tensor<float> w({2}, std::vector<float>{1.f, 2.f});
  std::vector<model::NamedParam<float>> params{{"w", w}};
  const train::AdamState st = train::AdamState::zeros_like(params);
  auto tensors = st.export_state(params);
  CHECK(train::AdamState::import_state(tensors, params, 7).step == 7);
  tensors.pop_back();
  CHECK_THROWS_AS(train::AdamState::import_state(tensors, params, 7), MigrationError);
}

TEST_CASE("trainer rejects unnormalised data and mismatched blocks") {
  field::GenConfig gc;
  gc.nt = 16;
  gc.nz = 32;
  gc.nx = 64;
  const FieldGrid raw = field::generate_synthetic(gc, {});
  const auto tc = tiny_train(0.0);
  CHECK_THROWS_AS(train::Trainer(raw, tiny_model(tc), tc), OrderingError);

  const FieldGrid data = tiny_dataset();
  auto wrong = tc;
  wrong.factors = {2, 2, 4};
  CHECK_THROWS_AS(train::Trainer(data, tiny_model(tc), wrong), ConfigError);
  auto big = tc;
  big.hr_block = {32, 16, 32};
  CHECK_THROWS_AS(train::Trainer(data, tiny_model(big), big), ConfigError);
}

TEST_CASE("training is deterministic and gamma changes the log") {
  const FieldGrid data = tiny_dataset();
  const auto tc = tiny_train(0.3);
  std::vector<train::EpochLog> a, b, c;
  train::train(data, tiny_model(tc), tc, {}, &a);
  train::train(data, tiny_model(tc), tc, {}, &b);
  CHECK(log_lines(a) == log_lines(b));
  train::train(data, tiny_model(tc), tiny_train(0.0), {}, &c);
  CHECK(log_lines(a) != log_lines(c));
  for (const auto& l : a) {
    CHECK(std::isfinite(l.loss));
    CHECK(l.pde > 0.0);
  }
  for (const auto& l : c) CHECK(l.pde == 0.0);
}

TEST_CASE("checkpoint round trip and resumed trajectory") {
  const FieldGrid data = tiny_dataset();
  auto tc = tiny_train(0.3);
  tc.epochs = 4;
  std::vector<train::EpochLog> full;
  const train::Checkpoint ref = train::train(data, tiny_model(tc), tc, {}, &full);

  auto half = tc;
  half.epochs = 2;
  std::vector<train::EpochLog> first, second;
  const train::Checkpoint mid = train::train(data, tiny_model(tc), half, {}, &first);

  const auto path = std::filesystem::temp_directory_path() / "iwsr_test_ckpt.iwsr";
  train::save_checkpoint(mid, path);
  const train::Checkpoint loaded = train::load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(train::checkpoint_to_tensors(loaded) == train::checkpoint_to_tensors(mid));
  CHECK(loaded.epoch == 2);
  CHECK(loaded.stats == *data.norm);

  train::Trainer resumed(data, loaded, tc);
  second = resumed.run();
  std::vector<std::string> joined = log_lines(first);
  for (const auto& l : log_lines(second)) joined.push_back(l);
  CHECK(joined == log_lines(full));
  CHECK(train::checkpoint_to_tensors(resumed.checkpoint()) == train::checkpoint_to_tensors(ref));

  // Identical forward pass from the restored parameters.
  model::SuperResModel<float> m1(mid.model), m2(loaded.model);
  m1.import_state(mid.params);
  m2.import_state(loaded.params);
  const FieldGrid lr = field::downsample(field::extract_patch(data, {0, 0, 0}, tc.hr_block), tc.factors);
  const auto y1 = train::super_resolve(m1, lr, tc.factors), y2 = train::super_resolve(m2, lr, tc.factors);
  CHECK(y1.vars == y2.vars);
}

TEST_CASE("checkpoint schema") {
  const FieldGrid data = tiny_dataset();
  auto tc = tiny_train(0.0);
  tc.epochs = 1;
  tc.blocks_per_epoch = 1;
  const train::Checkpoint ck = train::train(data, tiny_model(tc), tc);
  const auto tensors = train::checkpoint_to_tensors(ck);
  std::set<std::string> extra;
  std::size_t enc = 0, dec = 0, m = 0, v = 0;
  for (const auto& t : tensors) {
    if (t.name.rfind("encoder.", 0) == 0) ++enc;
    else if (t.name.rfind("decoder.", 0) == 0) ++dec;
    else if (t.name.rfind("adam.m.", 0) == 0) ++m;
    else if (t.name.rfind("adam.v.", 0) == 0) ++v;
    else extra.insert(t.name);
  }
  CHECK(extra == std::set<std::string>{"config.encoder", "config.encoder.down", "config.encoder.up", "config.decoder",
                                       "config.model", "config.train", "meta", "norm"});
  CHECK(enc + dec == ck.params.size());
  CHECK(m == ck.params.size());
  CHECK(v == ck.params.size());

  for (const char* name : {"meta", "norm", "config.train"}) {
    auto broken = tensors;
    std::erase_if(broken, [&](const NamedTensor& t) { return t.name == name; });
    CHECK_THROWS_AS(train::checkpoint_from_tensors(broken), MigrationError);
  }
}

TEST_CASE("regression-only smoke run halves the loss") {
  const FieldGrid data = tiny_dataset();
  auto tc = tiny_train(0.0);
  tc.epochs = 10;
  tc.blocks_per_epoch = 20;
  tc.batch = 1;
  tc.lr = 2e-3;
  std::vector<train::EpochLog> logs;
  train::train(data, tiny_model(tc), tc, {}, &logs);
  REQUIRE(logs.size() == 10);
  CHECK(logs.back().mse < 0.5 * logs.front().mse);
  CHECK(logs.back().loss == logs.back().mse);
}

TEST_CASE("fine-tune scales the learning rate and extends the epoch count") {
  const FieldGrid data = tiny_dataset();
  auto tc = tiny_train(0.0);
  tc.epochs = 1;
  const train::Checkpoint base = train::train(data, tiny_model(tc), tc);
  const train::Checkpoint tuned = train::fine_tune(base, data, tc, {0.1, false, 2});
  CHECK(tuned.epoch == 3);
  CHECK(tuned.train.lr == doctest::Approx(tc.lr * 0.1));
  CHECK(tuned.adam.step == 2 * (tc.blocks_per_epoch / tc.batch));
  CHECK_THROWS_AS(train::fine_tune(base, data, tc, {0.0, false, 1}), ConfigError);
}

TEST_CASE("super-resolve covers the HR lattice") {
  const FieldGrid data = tiny_dataset();
  const auto tc = tiny_train(0.0);
  model::SuperResModel<float> model(tiny_model(tc));
  const FieldGrid lr = field::downsample(data, tc.factors);  // 8 x 8 x 16
  const FieldGrid hr = train::super_resolve(model, lr, tc.factors);
  CHECK(hr.nt == 16);
  CHECK(hr.nz == 32);
  CHECK(hr.nx == 64);
  for (const auto& v : hr.vars)
    for (float x : v) REQUIRE(std::isfinite(x));
  for (std::size_t z = 0; z < hr.nz; ++z)
    for (std::size_t x = 0; x < hr.nx; ++x) CHECK(hr.solid(z, x) == lr.solid(z / 4, x / 4));

  auto one = tc;
  one.factors = {1, 1, 1};
  one.hr_block = {4, 4, 8};
  model::SuperResModel<float> same(tiny_model(one));
  const FieldGrid out = train::super_resolve(same, lr, {1, 1, 1});
  CHECK(out.nt == lr.nt);
  CHECK(out.nx == lr.nx);
}

TEST_CASE("desk-scale inference shape") {
  field::GenConfig gc;
  gc.nt = 16;
  gc.nz = 128;
  gc.nx = 128;
  const FieldGrid truth = field::normalize(field::terrain_fill(field::generate_synthetic(gc, {}))).first;
  const FieldGrid lr = field::downsample(truth, {4, 8, 4});  // 4 x 16 x 32
  auto mc = model::ModelConfig::for_lr_block({4, 16, 32}, 4);
  mc.decoder.width = 16;
  mc.decoder.depth = 2;
  model::SuperResModel<float> model(mc);
  const FieldGrid hr = train::super_resolve(model, lr, {4, 8, 4});
  CHECK(hr.nt == 16);
  CHECK(hr.nz == 128);
  CHECK(hr.nx == 128);
  for (const auto& v : hr.vars)
    for (float x : v) REQUIRE(std::isfinite(x));
}
