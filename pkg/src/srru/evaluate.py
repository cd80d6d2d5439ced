"""Benchmark-style evaluation: LR synthesis, reconstruction, Y metrics.

Protocol per image: take the 8-bit Y plane, crop it to a multiple of the
scale, synthesize the LR input with an antialiased bicubic downscale, then
reconstruct with either the network or plain bicubic upscaling. PSNR/SSIM
are computed on the 8-bit grid with ``scale`` pixels shaved per border.

Evaluation runs in double precision. The bicubic baseline is a single-shot
x``scale`` upscale (the convention behind the published baseline tables);
the network realizes x4 as two chained x2 levels.
"""

from __future__ import annotations

import numpy as np

from srru import metrics
from srru.data import load_luma
from srru.model import network_forward
from srru.resample import PLANE_SCALE, bicubic_resize, modcrop, quantize_u8


def super_resolve_plane(lr_plane, params):
    """Run the network on a [0,255] Y plane, returning the final x-scale plane."""
    x = np.asarray(lr_plane, dtype=np.float64)[None, None] / PLANE_SCALE
    outputs = network_forward(x, params)
    return outputs[-1][0, 0] * PLANE_SCALE


def reconstruct_image(hr_plane, scale, params=None):
    """(hr_cropped, sr_plane) for one image; bicubic-only when params is None."""
    hr = modcrop(quantize_u8(hr_plane), scale)
    lr = bicubic_resize(hr, 1.0 / scale, antialias=True)
    if params is None:
        sr = bicubic_resize(lr, float(scale), antialias=False)
    else:
        sr = super_resolve_plane(lr, params)
    return hr, sr


def evaluate_manifest(manifest, scale, params=None, with_baseline=False):
    """Per-image metric reports over a corpus, plus the aggregate mean.

    Returns (reports, baseline_reports); the baseline list is empty unless
    ``with_baseline`` is set (or the run itself is bicubic-only).
    """
    reports = []
    baseline = []
    for entry in manifest.entries:
        hr_plane = load_luma(entry.path)
        hr, sr = reconstruct_image(hr_plane, scale, params)
        reports.append(metrics.evaluate_pair(entry.path.stem, hr, sr, shave=scale))
        if with_baseline and params is not None:
            _, bic = reconstruct_image(hr_plane, scale, None)
            baseline.append(metrics.evaluate_pair(entry.path.stem, hr, bic, shave=scale))
    if reports:
        reports.append(metrics.mean_report(reports))
    if baseline:
        baseline.append(metrics.mean_report(baseline))
    return reports, baseline
