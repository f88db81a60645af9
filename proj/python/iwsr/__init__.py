# Copyright (c) 2026 The iwsr Authors
# SPDX-License-Identifier: Apache-2.0
"""Physics-informed super-resolution of internal-wave fields."""

from ._core import (
    Checkpoint,
    Error,
    Grid,
    ModelConfig,
    TrainConfig,
    baseline_upsample,
    continuity_rms,
    denormalize,
    downsample,
    eval_report,
    extract_patch,
    fft_check,
    fft_mse,
    generate,
    gradient_check,
    load_grid,
    normalize,
    psnr,
    render_slice_ppm,
    save_grid,
    set_thread_count,
    ssim,
    super_resolve,
    terrain_fill,
    thread_count,
    train,
)

__version__ = "0.1.0"
