"""Scalar, loop-based reference resampler.

Computes every output pixel independently from the kernel definition, with
no shared machinery with :mod:`srru.resample`. Used in tests to pin the
vectorized resizer down; far too slow for production use.
"""

import numpy as np


def _cubic(t):
    a = abs(t)
    if a <= 1.0:
        return 1.5 * a ** 3 - 2.5 * a ** 2 + 1.0
    if a <= 2.0:
        return -0.5 * a ** 3 + 2.5 * a ** 2 - 4.0 * a + 2.0
    return 0.0


def _resample_axis(values, out_len, scale, antialias):
    in_len = len(values)
    if scale < 1.0 and antialias:
        width = 4.0 / scale

        def kernel(t):
            return scale * _cubic(scale * t)
    else:
        width = 4.0
        kernel = _cubic
    taps = int(np.ceil(width)) + 2
    out = np.zeros(out_len)
    for k in range(out_len):
        u = (k + 1) / scale + 0.5 * (1.0 - 1.0 / scale)
        left = np.floor(u - width / 2.0)
        acc = 0.0
        wsum = 0.0
        for t in range(taps):
            pos = left + t
            weight = kernel(u - pos)
            src = int(min(max(pos, 1), in_len)) - 1
            acc += weight * values[src]
            wsum += weight
        out[k] = acc / wsum
    return out


def bicubic_resize_reference(img, scale, antialias=True):
    img = np.asarray(img, dtype=np.float64)
    out_h = int(round(img.shape[0] * scale))
    out_w = int(round(img.shape[1] * scale))
    tmp = np.zeros((out_h, img.shape[1]))
    for col in range(img.shape[1]):
        tmp[:, col] = _resample_axis(img[:, col], out_h, scale, antialias)
    out = np.zeros((out_h, out_w))
    for row in range(out_h):
        out[row, :] = _resample_axis(tmp[row, :], out_w, scale, antialias)
    return out
