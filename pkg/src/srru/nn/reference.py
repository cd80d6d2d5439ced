"""Naive loop convolutions used as correctness oracles for the fast path.

Deliberately written from the definition, one output scalar at a time, with
no shared code with :mod:`srru.nn.layers`. Small inputs only.
"""

import numpy as np


def conv2d_naive(x, params):
    n, c, h, w = x.shape
    o, i, kh, kw = params.weights.shape
    s, p = params.stride, params.padding
    assert c == i
    h_out = (h + 2 * p - kh) // s + 1
    w_out = (w + 2 * p - kw) // s + 1
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    out = np.zeros((n, o, h_out, w_out), dtype=np.result_type(x, params.weights))
    for b in range(n):
        for oc in range(o):
            for r in range(h_out):
                for col in range(w_out):
                    patch = xp[b, :, r * s:r * s + kh, col * s:col * s + kw]
                    out[b, oc, r, col] = np.sum(patch * params.weights[oc]) + params.bias[oc]
    return out


def conv_transpose2d_naive(x, params):
    n, c, h, w = x.shape
    i, o, kh, kw = params.weights.shape
    s, p = params.stride, params.padding
    assert c == i
    h_out = (h - 1) * s - 2 * p + kh
    w_out = (w - 1) * s - 2 * p + kw
    full = np.zeros((n, o, h_out + 2 * p, w_out + 2 * p), dtype=np.result_type(x, params.weights))
    for b in range(n):
        for ic in range(i):
            for r in range(h):
                for col in range(w):
                    full[b, :, r * s:r * s + kh, col * s:col * s + kw] += (
                        x[b, ic, r, col] * params.weights[ic]
                    )
    out = full[:, :, p:p + h_out, p:p + w_out]
    return out + params.bias[None, :, None, None]
