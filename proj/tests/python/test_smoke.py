# Copyright (c) 2026 The iwsr Authors
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

import iwsr


def small_grid(seed=7):
    return iwsr.generate(nt=8, nz=32, nx=64, topo="sill", seed=seed)


def test_generate_shapes_and_determinism():
    g = small_grid()
    assert g.shape == (8, 32, 64)
    assert g.var("u").shape == (8, 32, 64)
    assert g.terrain.shape == (32, 64)
    assert g.terrain.any()
    assert g == small_grid()


def test_zero_amplitude_is_still():
    g = iwsr.generate(nt=2, nz=16, nx=32, amplitude=0.0)
    assert np.abs(g.var("u")).max() == 0.0
    assert np.abs(g.var("w")).max() == 0.0


def test_arrays_round_trip():
    g = small_grid()
    fields = {v: g.var(v) for v in "TSuw"}
    h = iwsr.Grid.from_arrays(fields, g.terrain, g.dt, g.dz, g.dx)
    assert h == g
    with pytest.raises(iwsr.Error):
        h.set_var("T", np.zeros((1, 2, 3), dtype=np.float32))
    with pytest.raises(KeyError):
        h.var("p")


def test_terrain_fill_uses_fluid_mean():
    g = small_grid()
    f = iwsr.terrain_fill(g)
    solid = g.terrain
    for t in range(g.shape[0]):
        plane = g.var("T")[t]
        mean = np.float32(plane[~solid].astype(np.float64).mean())
        assert np.abs(f.var("T")[t][solid] - mean).max() <= 1e-6


def test_normalize_round_trip():
    g = iwsr.terrain_fill(small_grid())
    n = iwsr.normalize(g)
    assert n.normalized
    back = iwsr.denormalize(n)
    for v in "TSuw":
        np.testing.assert_allclose(back.var(v), g.var(v), atol=1e-5)


def test_metrics_against_self_and_baseline():
    g = small_grid()
    assert iwsr.ssim(g, g, "T") == pytest.approx(1.0, abs=1e-6)
    lr = iwsr.downsample(iwsr.terrain_fill(g), (2, 4, 4))
    assert lr.shape == (4, 8, 16)
    up = iwsr.baseline_upsample(lr, (2, 4, 4))
    assert up.shape == g.shape
    report = iwsr.eval_report(iwsr.Grid.from_arrays({v: up.var(v) for v in "TSuw"}, g.terrain), g)
    assert np.isfinite(report["psnr_avg"])
    assert report["psnr_avg"] < 100


def test_render_ppm_header():
    data = iwsr.render_slice_ppm(small_grid(), "u", 3)
    assert data.startswith(b"P6\n64 32\n255\n")
    assert len(data) == len(b"P6\n64 32\n255\n") + 64 * 32 * 3


def test_save_load(tmp_path):
    g = small_grid()
    path = tmp_path / "g.iwsr"
    iwsr.save_grid(g, path)
    assert iwsr.load_grid(path) == g


def test_tiny_training_and_inference(tmp_path):
    iwsr.set_thread_count(1)
    data = iwsr.normalize(iwsr.terrain_fill(iwsr.generate(nt=16, nz=32, nx=64, seed=5)))
    cfg = iwsr.TrainConfig()
    cfg.epochs = 2
    cfg.blocks_per_epoch = 2
    cfg.batch = 1
    cfg.points = 64
    cfg.pde_points = 16
    cfg.hr_block = (8, 16, 32)
    cfg.factors = (2, 4, 4)
    cfg.seed = 3
    model = iwsr.ModelConfig.for_lr_block(cfg.lr_block, 4)
    model.decoder_width = 16
    model.decoder_depth = 2
    ck, logs = iwsr.train(data, model, cfg)
    assert [l["epoch"] for l in logs] == [1, 2]
    assert all(np.isfinite(l["loss"]) for l in logs)
    _, again = iwsr.train(data, model, cfg)
    assert again == logs

    path = tmp_path / "m.ckpt"
    ck.save(path)
    loaded = iwsr.Checkpoint.load(path)
    assert loaded.epoch == 2
    assert loaded.parameter_count == ck.parameter_count > 0

    lr = iwsr.downsample(iwsr.terrain_fill(iwsr.generate(nt=8, nz=32, nx=64, seed=9)), (2, 4, 4))
    out = iwsr.super_resolve(loaded, lr, (2, 4, 4))
    assert out.shape == (8, 32, 64)
    assert np.isfinite(out.var("T")).all()


def test_bad_config_raises():
    cfg = iwsr.TrainConfig()
    cfg.gamma = 2.0
    data = iwsr.normalize(iwsr.terrain_fill(small_grid()))
    with pytest.raises(iwsr.Error):
        iwsr.train(data, iwsr.ModelConfig.for_lr_block(cfg.lr_block, 4), cfg)


def test_fft_check():
    r = iwsr.fft_check()
    assert r["roundtrip_max_error"] <= 1e-5
    assert r["parseval_relative"] <= 1e-4
