"""Deterministic bicubic resampling and YCbCr color conversion.

The resizer reproduces the classic MATLAB ``imresize`` behaviour that the
standard SR benchmark numbers were produced with:

* Keys cubic kernel with a = -0.5 and 4-tap support,
* center-aligned coordinate mapping (0.5 in output space maps to 0.5 in
  input space),
* on downscale with antialiasing the kernel is stretched by 1/scale and
  the weights renormalized,
* out-of-range taps are clamped to the border pixel (replication).

Each 2-D resize is separable and is applied as two dense matrix products,
``out = M_rows @ img @ M_cols.T``. That form makes the operation exactly
linear, cacheable, and trivially transposable, which the network's identity
branch needs for backpropagation. All arithmetic is double precision;
quantization to 8 bits happens only at file boundaries.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from srru.validation import ShapeError, check_plane

# Network-domain normalization divisor for [0,255] planes. A power of two is
# exact in binary floating point, so scaling in and out of the network does
# not perturb the identity branch relative to plane-domain bicubic resizing.
PLANE_SCALE = 256.0

# ITU-R BT.601 studio-swing YCbCr on [0,1]-normalized RGB. Y spans [16, 235].
_YCBCR_MATRIX = np.array(
    [
        [65.481, 128.553, 24.966],
        [-37.797, -74.203, 112.0],
        [112.0, -93.786, -18.214],
    ]
)
_YCBCR_OFFSET = np.array([16.0, 128.0, 128.0])


def cubic_kernel(x):
    """Keys cubic convolution kernel with a = -0.5 (support [-2, 2])."""
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    near = (1.5 * ax3 - 2.5 * ax2 + 1.0) * (ax <= 1)
    far = (-0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0) * ((1 < ax) & (ax <= 2))
    return near + far


@lru_cache(maxsize=128)
def _resize_matrix(in_len: int, out_len: int, scale: float, antialias: bool):
    """Dense (out_len, in_len) matrix of one resize axis. Do not mutate."""
    if scale < 1.0 and antialias:
        # Stretch the kernel to act as a combined interpolator/antialiaser.
        width = 4.0 / scale
        kernel = lambda x: scale * cubic_kernel(scale * x)
    else:
        width = 4.0
        kernel = cubic_kernel

    # 1-based output coordinates mapped back into input space so that
    # both grids share the same centered origin.
    x = np.arange(1, out_len + 1, dtype=np.float64)
    u = x / scale + 0.5 * (1.0 - 1.0 / scale)
    left = np.floor(u - width / 2.0)
    taps = int(np.ceil(width)) + 2
    indices = left[:, None] + np.arange(taps)[None, :]
    weights = kernel(u[:, None] - indices)
    weights /= weights.sum(axis=1, keepdims=True)

    # Clamp indices into range; duplicate entries accumulate, which
    # replicates the border pixels.
    indices = np.clip(indices, 1, in_len).astype(np.int64) - 1
    matrix = np.zeros((out_len, in_len))
    rows = np.repeat(np.arange(out_len), taps)
    np.add.at(matrix, (rows, indices.ravel()), weights.ravel())
    matrix.setflags(write=False)
    return matrix


def resize_output_length(in_len, scale):
    return int(round(in_len * scale))


def bicubic_resize(img, scale, antialias=True):
    """Resize a 2-D plane by ``scale`` (output dims = round(dims * scale)).

    ``antialias`` only has an effect for scale < 1. Values are not clamped;
    overshoot is intentional and quantization is the caller's business.
    """
    img = check_plane(img, "bicubic_resize input")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if scale == 1.0:
        return img.copy()
    h, w = img.shape
    out_h = resize_output_length(h, scale)
    out_w = resize_output_length(w, scale)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"bicubic_resize: output dims {(out_h, out_w)} must be positive")
    m_rows = _resize_matrix(h, out_h, float(scale), bool(antialias))
    m_cols = _resize_matrix(w, out_w, float(scale), bool(antialias))
    return m_rows @ img @ m_cols.T


@lru_cache(maxsize=64)
def _upscale_x2_matrix(in_len: int, dtype_name: str):
    m = _resize_matrix(in_len, 2 * in_len, 2.0, False).astype(np.dtype(dtype_name))
    m.setflags(write=False)
    return m


def bicubic_upscale_x2(x):
    """Bicubic 2x upscale of a (N,C,H,W) tensor, per plane, dtype preserving."""
    n, c, h, w = x.shape
    m_rows = _upscale_x2_matrix(h, x.dtype.name)
    m_cols = _upscale_x2_matrix(w, x.dtype.name)
    flat = x.reshape(n * c, h, w)
    out = np.matmul(np.matmul(m_rows, flat), m_cols.T)
    return out.reshape(n, c, 2 * h, 2 * w)


def bicubic_upscale_x2_adjoint(grad, in_hw):
    """Adjoint of :func:`bicubic_upscale_x2` for gradient propagation."""
    n, c = grad.shape[0], grad.shape[1]
    h, w = in_hw
    m_rows = _upscale_x2_matrix(h, grad.dtype.name)
    m_cols = _upscale_x2_matrix(w, grad.dtype.name)
    flat = grad.reshape(n * c, 2 * h, 2 * w)
    out = np.matmul(np.matmul(m_rows.T, flat), m_cols)
    return out.reshape(n, c, h, w)


def modcrop(img, modulo):
    """Crop bottom/right so both dims are multiples of ``modulo``."""
    img = check_plane(img, "modcrop input")
    h = img.shape[0] - img.shape[0] % modulo
    w = img.shape[1] - img.shape[1] % modulo
    if h < 1 or w < 1:
        raise ShapeError(f"modcrop: image {img.shape} too small for modulo {modulo}")
    return img[:h, :w]


def quantize_u8(img):
    """Round and clamp a float plane to the 8-bit grid, kept as float64."""
    return np.clip(np.round(img), 0.0, 255.0)


def rgb_to_ycbcr(img):
    """Split 8-bit RGB (H,W,3) into studio-swing float Y, Cb, Cr planes.

    Pure white maps to Y = 235, pure black to Y = 16. Planes are returned
    unrounded; quantize at file boundaries only.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"rgb_to_ycbcr: expected (H, W, 3), got {img.shape}")
    rgb = img.astype(np.float64) / 255.0
    ycc = rgb @ _YCBCR_MATRIX.T + _YCBCR_OFFSET
    return ycc[:, :, 0], ycc[:, :, 1], ycc[:, :, 2]


def ycbcr_to_rgb(y, cb, cr):
    """Exact inverse of :func:`rgb_to_ycbcr`; returns float RGB in [0, 255]."""
    y = check_plane(y, "y")
    ycc = np.stack([y, np.asarray(cb, dtype=np.float64), np.asarray(cr, dtype=np.float64)], axis=-1)
    inv = np.linalg.inv(_YCBCR_MATRIX)
    rgb = (ycc - _YCBCR_OFFSET) @ inv.T
    return rgb * 255.0
