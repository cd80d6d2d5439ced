"""Dense NCHW tensor primitives with analytic backward passes.

Convolutions run through im2col plus a single BLAS matmul; the matching
naive loop implementations live in :mod:`srru.nn.reference` and serve as the
correctness oracle. Every backward here is the exact transpose of its
forward linear map, so adjoint identities hold to rounding error.

All functions are pure: they never mutate their arguments and carry no
hidden state, so concurrent calls on distinct data are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from srru.validation import ShapeError, check_channels, check_spatial_match, check_tensor


@dataclass
class ConvParams:
    """Weights of one (possibly transposed) convolution layer.

    For a regular convolution ``weights`` is ``(out_ch, in_ch, kh, kw)``.
    For a transposed convolution it is ``(in_ch, out_ch, kh, kw)``, i.e. the
    weight layout of the stride-``stride`` convolution it is the adjoint of.
    """

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 1

    @property
    def kernel_size(self):
        return self.weights.shape[2]


def he_init(shape, fan_in, rng):
    """Zero-mean normal weights with std sqrt(2 / fan_in).

    ``rng`` is a seed or a ``numpy.random.Generator``; the same seed always
    yields the same weights.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    std = np.sqrt(2.0 / fan_in)
    return rng.normal(0.0, std, size=shape)


def conv_params(in_ch, out_ch, kernel, rng, stride=1, padding=None, dtype=np.float32):
    """He-initialized convolution parameters with zero bias."""
    if padding is None:
        padding = (kernel - 1) // 2
    fan_in = in_ch * kernel * kernel
    w = he_init((out_ch, in_ch, kernel, kernel), fan_in, rng).astype(dtype)
    b = np.zeros(out_ch, dtype=dtype)
    return ConvParams(w, b, stride=stride, padding=padding)


def bilinear_kernel(factor=2):
    """1-D kernel of factor-x bilinear upsampling (length 2*factor)."""
    size = 2 * factor
    center = (2 * factor - factor % 2 - 1) / (2.0 * factor)
    taps = 1.0 - np.abs(np.arange(size) / factor - center)
    return taps


def transposed_params(in_ch, out_ch, dtype=np.float32):
    """Stride-2 4x4 transposed-convolution parameters.

    Initialized to the 2x bilinear kernel replicated over channel pairs
    (input channel i feeds output channel i % out_ch), normalized so a
    constant input stays constant away from the borders.
    """
    if in_ch % out_ch != 0:
        raise ShapeError(f"transposed conv: in_ch {in_ch} not a multiple of out_ch {out_ch}")
    taps = bilinear_kernel(2)
    k2 = np.outer(taps, taps)
    w = np.zeros((in_ch, out_ch, 4, 4), dtype=dtype)
    group = in_ch // out_ch
    for i in range(in_ch):
        w[i, i % out_ch] = k2 / group
    b = np.zeros(out_ch, dtype=dtype)
    return ConvParams(w, b, stride=2, padding=1)


def _im2col(x, kh, kw, stride, padding):
    """Unfold x (N,C,H,W) into columns (N, C*kh*kw, H_out*W_out)."""
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv: kernel {kh}x{kw} larger than padded input {x.shape[2:]} ")
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, h_out * w_out)
    return np.ascontiguousarray(cols), h_out, w_out


def _col2im(cols, x_shape, kh, kw, stride, padding):
    """Adjoint of _im2col: scatter-add columns back onto an (N,C,H,W) grid."""
    n, c, h, w = x_shape
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    grid = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    cols6 = cols.reshape(n, c, kh, kw, h_out, w_out)
    for ky in range(kh):
        for kx in range(kw):
            grid[:, :, ky:ky + stride * h_out:stride, kx:kx + stride * w_out:stride] += cols6[:, :, ky, kx]
    if padding:
        return grid[:, :, padding:-padding, padding:-padding]
    return grid


def _conv_fwd(x, weights, stride, padding):
    n = x.shape[0]
    o, i, kh, kw = weights.shape
    cols, h_out, w_out = _im2col(x, kh, kw, stride, padding)
    w2 = weights.reshape(o, i * kh * kw)
    c2 = cols.transpose(1, 0, 2).reshape(i * kh * kw, n * h_out * w_out)
    y2 = w2 @ c2
    return y2.reshape(o, n, h_out * w_out).transpose(1, 0, 2).reshape(n, o, h_out, w_out)


def _conv_input_grad(grad_y, weights, x_shape, stride, padding):
    n = grad_y.shape[0]
    o, i, kh, kw = weights.shape
    h_out, w_out = grad_y.shape[2], grad_y.shape[3]
    w2 = weights.reshape(o, i * kh * kw)
    g2 = grad_y.transpose(1, 0, 2, 3).reshape(o, n * h_out * w_out)
    cols = (w2.T @ g2).reshape(i * kh * kw, n, h_out * w_out).transpose(1, 0, 2)
    return _col2im(np.ascontiguousarray(cols), x_shape, kh, kw, stride, padding)


def _conv_weight_grad(x, grad_y, kh, kw, stride, padding):
    n, o = grad_y.shape[0], grad_y.shape[1]
    i = x.shape[1]
    cols, h_out, w_out = _im2col(x, kh, kw, stride, padding)
    c2 = cols.transpose(1, 0, 2).reshape(i * kh * kw, n * h_out * w_out)
    g2 = grad_y.transpose(1, 0, 2, 3).reshape(o, n * h_out * w_out)
    return (g2 @ c2.T).reshape(o, i, kh, kw)


def conv2d(x, params):
    """2-D convolution of x (N,C,H,W) with OIHW weights plus bias."""
    x = check_tensor(x, "conv2d input")
    check_channels(x, params.weights.shape[1], "conv2d input")
    y = _conv_fwd(x, params.weights, params.stride, params.padding)
    return y + params.bias[None, :, None, None]


def conv2d_backward(grad_y, x, params):
    """Gradients of conv2d w.r.t. (input, weights, bias)."""
    grad_x = _conv_input_grad(grad_y, params.weights, x.shape, params.stride, params.padding)
    kh, kw = params.weights.shape[2], params.weights.shape[3]
    grad_w = _conv_weight_grad(x, grad_y, kh, kw, params.stride, params.padding)
    grad_b = grad_y.sum(axis=(0, 2, 3))
    return grad_x, grad_w, grad_b


def conv_transpose2d_output_shape(x_shape, params):
    n, _, h, w = x_shape
    k = params.weights.shape[2]
    out_ch = params.weights.shape[1]
    h_out = (h - 1) * params.stride - 2 * params.padding + k
    w_out = (w - 1) * params.stride - 2 * params.padding + k
    return (n, out_ch, h_out, w_out)


def conv_transpose2d(x, params):
    """Transposed convolution: the adjoint of a strided conv2d, plus bias.

    With the default kernel 4, stride 2, padding 1 the output is exactly
    (2H, 2W).
    """
    x = check_tensor(x, "conv_transpose2d input")
    check_channels(x, params.weights.shape[0], "conv_transpose2d input")
    out_shape = conv_transpose2d_output_shape(x.shape, params)
    if out_shape[2] < 1 or out_shape[3] < 1:
        raise ShapeError(f"conv_transpose2d: non-positive output dims {out_shape[2:]}")
    y = _conv_input_grad(x, params.weights, out_shape, params.stride, params.padding)
    return y + params.bias[None, :, None, None]


def conv_transpose2d_backward(grad_y, x, params):
    """Gradients of conv_transpose2d w.r.t. (input, weights, bias)."""
    grad_x = _conv_fwd(grad_y, params.weights, params.stride, params.padding)
    kh, kw = params.weights.shape[2], params.weights.shape[3]
    grad_w = _conv_weight_grad(grad_y, x, kh, kw, params.stride, params.padding)
    grad_b = grad_y.sum(axis=(0, 2, 3))
    return grad_x, grad_w, grad_b


def lrelu(x, slope=0.2):
    """Leaky ReLU: x for x >= 0, slope * x otherwise."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"lrelu slope must be in (0, 1), got {slope}")
    return np.where(x >= 0, x, slope * x)


def lrelu_backward(grad_y, x, slope=0.2):
    return np.where(x >= 0, grad_y, slope * grad_y)


def sigmoid(x):
    """Overflow-safe logistic function; outputs lie strictly in (0, 1).

    Saturated values are nudged to the nearest representable number inside
    the open interval so downstream ratio checks never see exact 0 or 1.
    """
    x = np.asarray(x)
    dtype = np.result_type(x.dtype, np.float32)
    out = np.empty(x.shape, dtype=dtype)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    lo = np.nextafter(dtype.type(0), dtype.type(1))
    hi = np.nextafter(dtype.type(1), dtype.type(0))
    return np.clip(out, lo, hi)


def sigmoid_backward(grad_y, y):
    return grad_y * y * (1.0 - y)


def global_avg_pool(x):
    """Mean over the spatial dims: (N,C,H,W) -> (N,C,1,1)."""
    x = check_tensor(x, "global_avg_pool input")
    return x.mean(axis=(2, 3), keepdims=True)


def global_avg_pool_backward(grad_y, x_shape):
    h, w = x_shape[2], x_shape[3]
    return np.broadcast_to(grad_y / (h * w), x_shape).copy()


def concat_channels(a, b):
    """Concatenate along the channel axis, a's channels first."""
    a = check_tensor(a, "concat lhs")
    b = check_tensor(b, "concat rhs")
    check_spatial_match(a, b, "concat lhs", "concat rhs")
    return np.concatenate([a, b], axis=1)


def concat_channels_backward(grad_y, a_channels):
    return grad_y[:, :a_channels], grad_y[:, a_channels:]


def channel_scale(x, factors):
    """Multiply each channel by a per-(sample, channel) scalar factor."""
    x = check_tensor(x, "channel_scale input")
    if factors.shape != (x.shape[0], x.shape[1], 1, 1):
        raise ShapeError(
            f"channel_scale factors: expected {(x.shape[0], x.shape[1], 1, 1)}, got {factors.shape}"
        )
    return x * factors


def channel_scale_backward(grad_y, x, factors):
    grad_x = grad_y * factors
    grad_f = (grad_y * x).sum(axis=(2, 3), keepdims=True)
    return grad_x, grad_f
