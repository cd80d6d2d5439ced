"""PSNR and SSIM on Y planes, following the SR benchmark convention.

Both metrics quantize their inputs to the 8-bit grid and shave a border
before comparing, because that is how the published benchmark tables are
computed. SSIM uses the standard 11x11 Gaussian window with sigma 1.5,
K1 = 0.01, K2 = 0.03, L = 255, evaluated in 'valid' mode.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from srru.resample import quantize_u8
from srru.validation import ShapeError, check_plane


@dataclass
class MetricReport:
    image_id: str
    psnr: float
    ssim: float
    shave: int


def _shaved_u8(ref, test, shave):
    ref = check_plane(ref, "ref")
    test = check_plane(test, "test")
    if ref.shape != test.shape:
        raise ShapeError(f"metric inputs differ: ref {ref.shape} vs test {test.shape}")
    if shave < 0:
        raise ValueError(f"shave must be >= 0, got {shave}")
    if shave:
        if 2 * shave >= min(ref.shape):
            raise ShapeError(f"shave {shave} leaves no pixels of {ref.shape}")
        ref = ref[shave:-shave, shave:-shave]
        test = test[shave:-shave, shave:-shave]
    return quantize_u8(ref), quantize_u8(test)


def psnr_y(ref, test, shave=0):
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    ref, test = _shaved_u8(ref, test, shave)
    mse = np.mean((ref - test) ** 2)
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(255.0 ** 2 / mse))


def _gaussian_window(size=11, sigma=1.5):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img, taps):
    """Separable 'valid'-mode correlation with a symmetric 1-D window."""
    rows = np.lib.stride_tricks.sliding_window_view(img, len(taps), axis=0) @ taps
    return np.lib.stride_tricks.sliding_window_view(rows, len(taps), axis=1) @ taps


def ssim_y(ref, test, shave=0, window_size=11, sigma=1.5, k1=0.01, k2=0.03, peak=255.0):
    """Mean local structural similarity; 1.0 iff the shaved planes match."""
    ref, test = _shaved_u8(ref, test, shave)
    if min(ref.shape) < window_size:
        raise ShapeError(f"image {ref.shape} smaller than SSIM window {window_size}")
    taps = _gaussian_window(window_size, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2

    mu1 = _filter_valid(ref, taps)
    mu2 = _filter_valid(test, taps)
    mu1_sq = mu1 * mu1
    mu2_sq = mu2 * mu2
    mu12 = mu1 * mu2
    var1 = _filter_valid(ref * ref, taps) - mu1_sq
    var2 = _filter_valid(test * test, taps) - mu2_sq
    cov = _filter_valid(ref * test, taps) - mu12

    ssim_map = ((2.0 * mu12 + c1) * (2.0 * cov + c2)) / (
        (mu1_sq + mu2_sq + c1) * (var1 + var2 + c2)
    )
    return float(ssim_map.mean())


def evaluate_pair(image_id, ref, test, shave):
    return MetricReport(
        image_id=image_id,
        psnr=psnr_y(ref, test, shave),
        ssim=ssim_y(ref, test, shave),
        shave=shave,
    )


def mean_report(reports):
    psnrs = [r.psnr for r in reports]
    ssims = [r.ssim for r in reports]
    shave = reports[0].shave if reports else 0
    return MetricReport("mean", float(np.mean(psnrs)), float(np.mean(ssims)), shave)


def reports_to_csv(reports, scale):
    """Machine-readable results: image_id, scale, psnr_db, ssim."""
    buf = io.StringIO()
    buf.write("image_id,scale,psnr_db,ssim\n")
    for r in reports:
        buf.write(f"{r.image_id},{scale},{r.psnr:.4f},{r.ssim:.4f}\n")
    return buf.getvalue()


def reports_to_table(reports, scale, title=""):
    """Aligned plain-text table of per-image and aggregate results."""
    width = max([len(r.image_id) for r in reports] + [8])
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'image':<{width}}  scale  {'psnr_db':>8}  {'ssim':>7}")
    for r in reports:
        lines.append(f"{r.image_id:<{width}}  x{scale:<4}  {r.psnr:8.2f}  {r.ssim:7.4f}")
    return "\n".join(lines)
