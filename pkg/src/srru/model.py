"""The two-branch recursive super-resolution network.

Each pyramid level doubles resolution: a learnable residual branch
(feature extraction, n weight-shared recursive units, transposed-conv
upsampling) is summed with a fixed bicubic identity branch. A recursive
unit recalibrates its input with channel attention, fuses
original/shallow/deep features by channel concatenation (C -> 2C -> 4C),
compresses back to C with a 1x1 convolution, and adds the level's first
feature map.

Backward passes are composed explicitly from the layer-local gradients in
:mod:`srru.nn`; parameter gradients accumulate by name, which makes the
weight sharing across recursion applications exact. A x4 network chains two
x2 levels image-to-image, each level with its own parameters.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from srru import nn
from srru.resample import bicubic_upscale_x2, bicubic_upscale_x2_adjoint
from srru.validation import (
    ConfigError,
    ShapeError,
    check_channels,
    check_same_shape,
    check_tensor,
)

SUPPORTED_SCALES = (2, 4)


@dataclass
class AttentionParams:
    reduce: nn.ConvParams
    expand: nn.ConvParams
    reduction_ratio: int = 4


@dataclass
class UnitParams:
    attention: AttentionParams | None
    h1: tuple[nn.ConvParams, nn.ConvParams]
    h2: tuple[nn.ConvParams, nn.ConvParams]
    h3: nn.ConvParams | None
    fusion: bool = True


@dataclass
class LevelParams:
    feature_extract: nn.ConvParams
    unit: UnitParams
    upsample: nn.ConvParams
    identity_upsample: nn.ConvParams | None = None


@dataclass
class NetworkParams:
    levels: list[LevelParams]
    n_units: int
    scale: int
    channels: int
    reduction_ratio: int
    lrelu_slope: float = 0.2

    def __post_init__(self):
        if self.scale != 2 ** len(self.levels):
            raise ConfigError(f"scale {self.scale} != 2^levels ({len(self.levels)} levels)")


def build_attention(channels, ratio, rng, dtype=np.float32):
    if channels % ratio != 0:
        raise ConfigError(f"channels {channels} not divisible by reduction ratio {ratio}")
    reduced = channels // ratio
    return AttentionParams(
        reduce=nn.conv_params(channels, reduced, 1, rng, dtype=dtype),
        expand=nn.conv_params(reduced, channels, 1, rng, dtype=dtype),
        reduction_ratio=ratio,
    )


def build_unit(channels, ratio, rng, attention=True, fusion=True, dtype=np.float32):
    c = channels
    att = build_attention(c, ratio, rng, dtype) if attention else None
    if fusion:
        h1 = (nn.conv_params(c, c, 3, rng, dtype=dtype), nn.conv_params(c, c, 3, rng, dtype=dtype))
        h2 = (nn.conv_params(2 * c, 2 * c, 3, rng, dtype=dtype), nn.conv_params(2 * c, 2 * c, 3, rng, dtype=dtype))
        h3 = nn.conv_params(4 * c, c, 1, rng, dtype=dtype)
    else:
        # Plain cascade: no concatenations, so every conv stays at C channels
        # and the 1x1 compression disappears.
        h1 = (nn.conv_params(c, c, 3, rng, dtype=dtype), nn.conv_params(c, c, 3, rng, dtype=dtype))
        h2 = (nn.conv_params(c, c, 3, rng, dtype=dtype), nn.conv_params(c, c, 3, rng, dtype=dtype))
        h3 = None
    return UnitParams(attention=att, h1=h1, h2=h2, h3=h3, fusion=fusion)


def build_network(
    scale=2,
    channels=64,
    n_units=6,
    reduction_ratio=4,
    lrelu_slope=0.2,
    attention=True,
    fusion=True,
    learnable_identity=False,
    rng=0,
    dtype=np.float32,
):
    """He-initialized network parameters for a x2 or x4 pyramid."""
    if scale not in SUPPORTED_SCALES:
        raise ConfigError(f"unsupported scale {scale}; supported: {SUPPORTED_SCALES}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    levels = []
    for _ in range(scale.bit_length() - 1):
        levels.append(
            LevelParams(
                feature_extract=nn.conv_params(1, channels, 3, rng, dtype=dtype),
                unit=build_unit(channels, reduction_ratio, rng, attention, fusion, dtype),
                upsample=nn.transposed_params(channels, 1, dtype=dtype),
                identity_upsample=nn.transposed_params(1, 1, dtype=dtype) if learnable_identity else None,
            )
        )
    return NetworkParams(
        levels=levels,
        n_units=n_units,
        scale=scale,
        channels=channels,
        reduction_ratio=reduction_ratio,
        lrelu_slope=lrelu_slope,
    )


# ---------------------------------------------------------------------------
# parameter bookkeeping


def _conv_entries(prefix, p):
    return [(f"{prefix}.weights", p.weights), (f"{prefix}.bias", p.bias)]


def named_parameters(params):
    """Ordered name -> array view of every unique learnable tensor.

    The shared recursive unit appears exactly once per level, so the result
    is independent of ``n_units`` and mutating an entry mutates the network.
    """
    entries = []
    for idx, lv in enumerate(params.levels):
        pre = f"level{idx}"
        entries += _conv_entries(f"{pre}.feature", lv.feature_extract)
        u = lv.unit
        if u.attention is not None:
            entries += _conv_entries(f"{pre}.unit.att_reduce", u.attention.reduce)
            entries += _conv_entries(f"{pre}.unit.att_expand", u.attention.expand)
        entries += _conv_entries(f"{pre}.unit.h1a", u.h1[0])
        entries += _conv_entries(f"{pre}.unit.h1b", u.h1[1])
        entries += _conv_entries(f"{pre}.unit.h2a", u.h2[0])
        entries += _conv_entries(f"{pre}.unit.h2b", u.h2[1])
        if u.h3 is not None:
            entries += _conv_entries(f"{pre}.unit.h3", u.h3)
        entries += _conv_entries(f"{pre}.upsample", lv.upsample)
        if lv.identity_upsample is not None:
            entries += _conv_entries(f"{pre}.identity_upsample", lv.identity_upsample)
    return dict(entries)


def param_count(params):
    """Number of unique learnable scalars (independent of n_units)."""
    return int(sum(v.size for v in named_parameters(params).values()))


def zero_residual_path(params):
    """Zero every learnable parameter in place (identity branch isolation)."""
    for arr in named_parameters(params).values():
        arr[...] = 0.0
    return params


def cast_network(params, dtype):
    """Copy of the network with every parameter cast to ``dtype``."""
    out = copy.deepcopy(params)
    for lv in out.levels:
        convs = [lv.feature_extract, lv.upsample, lv.unit.h1[0], lv.unit.h1[1], lv.unit.h2[0], lv.unit.h2[1]]
        if lv.unit.h3 is not None:
            convs.append(lv.unit.h3)
        if lv.unit.attention is not None:
            convs += [lv.unit.attention.reduce, lv.unit.attention.expand]
        if lv.identity_upsample is not None:
            convs.append(lv.identity_upsample)
        for cp in convs:
            cp.weights = cp.weights.astype(dtype)
            cp.bias = cp.bias.astype(dtype)
    return out


class _Grads(dict):
    def add(self, name, value):
        if name in self:
            self[name] = self[name] + value
        else:
            self[name] = value


# ---------------------------------------------------------------------------
# attention


@dataclass
class _AttentionCache:
    u_prev: np.ndarray
    pooled: np.ndarray
    t1: np.ndarray
    beta: np.ndarray


def _attention_fwd(u_prev, params, slope):
    check_channels(u_prev, params.reduce.weights.shape[1], "attention input")
    pooled = nn.global_avg_pool(u_prev)
    t1 = nn.conv2d(pooled, params.reduce)
    t3 = nn.conv2d(nn.lrelu(t1, slope), params.expand)
    beta = nn.sigmoid(t3)
    r_o = nn.channel_scale(u_prev, beta)
    return r_o, _AttentionCache(u_prev, pooled, t1, beta)


def _attention_bwd(grad_ro, cache, params, slope, grads, prefix):
    g_u1, g_beta = nn.channel_scale_backward(grad_ro, cache.u_prev, cache.beta)
    g_t3 = nn.sigmoid_backward(g_beta, cache.beta)
    g_t2, gw, gb = nn.conv2d_backward(g_t3, nn.lrelu(cache.t1, slope), params.expand)
    grads.add(f"{prefix}.att_expand.weights", gw)
    grads.add(f"{prefix}.att_expand.bias", gb)
    g_t1 = nn.lrelu_backward(g_t2, cache.t1, slope)
    g_pooled, gw, gb = nn.conv2d_backward(g_t1, cache.pooled, params.reduce)
    grads.add(f"{prefix}.att_reduce.weights", gw)
    grads.add(f"{prefix}.att_reduce.bias", gb)
    g_u2 = nn.global_avg_pool_backward(g_pooled, cache.u_prev.shape)
    return g_u1 + g_u2


def attention_forward(u_prev, params, slope=0.2):
    """Channel recalibration: pool, reduce, LReLU, expand, sigmoid, rescale."""
    u_prev = check_tensor(u_prev, "attention input")
    return _attention_fwd(u_prev, params, slope)[0]


# ---------------------------------------------------------------------------
# recursive unit


@dataclass
class _UnitCache:
    u_prev: np.ndarray
    att: _AttentionCache | None
    r_o: np.ndarray
    h1a_out: np.ndarray
    h1b_out: np.ndarray
    h2a_out: np.ndarray
    h2b_out: np.ndarray
    r_c2: np.ndarray | None


def _unit_fwd(u_prev, u0, params, slope):
    if params.attention is not None:
        r_o, att_cache = _attention_fwd(u_prev, params.attention, slope)
    else:
        r_o, att_cache = u_prev, None

    if params.fusion:
        h1a_out = nn.conv2d(nn.lrelu(r_o, slope), params.h1[0])
        h1b_out = nn.conv2d(nn.lrelu(h1a_out, slope), params.h1[1])
        r_c1 = nn.concat_channels(r_o, h1b_out)
        h2a_out = nn.conv2d(nn.lrelu(r_c1, slope), params.h2[0])
        h2b_out = nn.conv2d(nn.lrelu(h2a_out, slope), params.h2[1])
        r_c2 = nn.concat_channels(r_c1, h2b_out)
        u_k = nn.conv2d(nn.lrelu(r_c2, slope), params.h3) + u0
        cache = _UnitCache(u_prev, att_cache, r_o, h1a_out, h1b_out, h2a_out, h2b_out, r_c2)
    else:
        h1a_out = nn.conv2d(nn.lrelu(r_o, slope), params.h1[0])
        h1b_out = nn.conv2d(nn.lrelu(h1a_out, slope), params.h1[1])
        h2a_out = nn.conv2d(nn.lrelu(h1b_out, slope), params.h2[0])
        h2b_out = nn.conv2d(nn.lrelu(h2a_out, slope), params.h2[1])
        u_k = h2b_out + u0
        cache = _UnitCache(u_prev, att_cache, r_o, h1a_out, h1b_out, h2a_out, h2b_out, None)
    return u_k, cache


def _unit_bwd(grad_uk, cache, params, slope, grads, prefix):
    """Returns (grad wrt u_prev, grad wrt u0)."""
    grad_u0 = grad_uk
    if params.fusion:
        c = cache.r_o.shape[1]
        g_a5, gw, gb = nn.conv2d_backward(grad_uk, nn.lrelu(cache.r_c2, slope), params.h3)
        grads.add(f"{prefix}.h3.weights", gw)
        grads.add(f"{prefix}.h3.bias", gb)
        g_rc2 = nn.lrelu_backward(g_a5, cache.r_c2, slope)
        g_rc1, g_h2b = nn.concat_channels_backward(g_rc2, 2 * c)

        g_a4, gw, gb = nn.conv2d_backward(g_h2b, nn.lrelu(cache.h2a_out, slope), params.h2[1])
        grads.add(f"{prefix}.h2b.weights", gw)
        grads.add(f"{prefix}.h2b.bias", gb)
        g_h2a = nn.lrelu_backward(g_a4, cache.h2a_out, slope)

        r_c1 = nn.concat_channels(cache.r_o, cache.h1b_out)
        g_a3, gw, gb = nn.conv2d_backward(g_h2a, nn.lrelu(r_c1, slope), params.h2[0])
        grads.add(f"{prefix}.h2a.weights", gw)
        grads.add(f"{prefix}.h2a.bias", gb)
        g_rc1 = g_rc1 + nn.lrelu_backward(g_a3, r_c1, slope)
        g_ro, g_h1b = nn.concat_channels_backward(g_rc1, c)
    else:
        g_h2b = grad_uk
        g_a4, gw, gb = nn.conv2d_backward(g_h2b, nn.lrelu(cache.h2a_out, slope), params.h2[1])
        grads.add(f"{prefix}.h2b.weights", gw)
        grads.add(f"{prefix}.h2b.bias", gb)
        g_h2a = nn.lrelu_backward(g_a4, cache.h2a_out, slope)

        g_a3, gw, gb = nn.conv2d_backward(g_h2a, nn.lrelu(cache.h1b_out, slope), params.h2[0])
        grads.add(f"{prefix}.h2a.weights", gw)
        grads.add(f"{prefix}.h2a.bias", gb)
        g_h1b = nn.lrelu_backward(g_a3, cache.h1b_out, slope)
        g_ro = np.zeros_like(cache.r_o)

    g_a2, gw, gb = nn.conv2d_backward(g_h1b, nn.lrelu(cache.h1a_out, slope), params.h1[1])
    grads.add(f"{prefix}.h1b.weights", gw)
    grads.add(f"{prefix}.h1b.bias", gb)
    g_h1a = nn.lrelu_backward(g_a2, cache.h1a_out, slope)

    g_a1, gw, gb = nn.conv2d_backward(g_h1a, nn.lrelu(cache.r_o, slope), params.h1[0])
    grads.add(f"{prefix}.h1a.weights", gw)
    grads.add(f"{prefix}.h1a.bias", gb)
    g_ro = g_ro + nn.lrelu_backward(g_a1, cache.r_o, slope)

    if params.attention is not None:
        g_uprev = _attention_bwd(g_ro, cache.att, params.attention, slope, grads, prefix)
    else:
        g_uprev = g_ro
    return g_uprev, grad_u0


def unit_forward(u_prev, u0, params, slope=0.2):
    """One recursive unit application: U_k from U_{k-1} and the level's U_0."""
    u_prev = check_tensor(u_prev, "unit input")
    u0 = check_tensor(u0, "unit u0")
    check_same_shape(u_prev, u0, "unit input", "unit u0")
    return _unit_fwd(u_prev, u0, params, slope)[0]


# ---------------------------------------------------------------------------
# pyramid levels


@dataclass
class _LevelCache:
    y_lr: np.ndarray
    u0: np.ndarray
    unit_caches: list
    u_n: np.ndarray


def _level_fwd(y_lr, lv, net, want_cache):
    u0 = nn.conv2d(y_lr, lv.feature_extract)
    u = u0
    unit_caches = []
    for _ in range(net.n_units):
        u, cache = _unit_fwd(u, u0, lv.unit, net.lrelu_slope)
        if want_cache:
            unit_caches.append(cache)
    i_rb = nn.conv_transpose2d(u, lv.upsample)
    if lv.identity_upsample is not None:
        i_ib = nn.conv_transpose2d(y_lr, lv.identity_upsample)
    else:
        i_ib = bicubic_upscale_x2(y_lr)
    out = i_rb + i_ib
    return out, (_LevelCache(y_lr, u0, unit_caches, u) if want_cache else None)


def _level_bwd(grad_out, cache, lv, net, grads, prefix, need_input_grad):
    g_un, gw, gb = nn.conv_transpose2d_backward(grad_out, cache.u_n, lv.upsample)
    grads.add(f"{prefix}.upsample.weights", gw)
    grads.add(f"{prefix}.upsample.bias", gb)

    if lv.identity_upsample is not None:
        g_in_identity, gw, gb = nn.conv_transpose2d_backward(grad_out, cache.y_lr, lv.identity_upsample)
        grads.add(f"{prefix}.identity_upsample.weights", gw)
        grads.add(f"{prefix}.identity_upsample.bias", gb)
    elif need_input_grad:
        g_in_identity = bicubic_upscale_x2_adjoint(grad_out, cache.y_lr.shape[2:])
    else:
        g_in_identity = None

    g_u = g_un
    g_u0 = None
    for unit_cache in reversed(cache.unit_caches):
        g_u, g_u0_k = _unit_bwd(g_u, unit_cache, lv.unit, net.lrelu_slope, grads, f"{prefix}.unit")
        g_u0 = g_u0_k if g_u0 is None else g_u0 + g_u0_k
    g_u0_total = g_u if g_u0 is None else g_u + g_u0

    g_in_res, gw, gb = nn.conv2d_backward(g_u0_total, cache.y_lr, lv.feature_extract)
    grads.add(f"{prefix}.feature.weights", gw)
    grads.add(f"{prefix}.feature.bias", gb)

    if not need_input_grad:
        return None
    return g_in_res if g_in_identity is None else g_in_res + g_in_identity


def level_forward(y_lr, params, level=0):
    """One x2 pyramid level: residual branch plus bicubic identity branch."""
    y_lr = check_tensor(y_lr, "level input")
    check_channels(y_lr, 1, "level input")
    return _level_fwd(y_lr, params.levels[level], params, want_cache=False)[0]


def network_forward(y_lr, params):
    """All pyramid level outputs, low to high resolution (deep supervision)."""
    return network_forward_cached(y_lr, params, want_cache=False)[0]


def network_forward_cached(y_lr, params, want_cache=True):
    y_lr = check_tensor(y_lr, "network input")
    check_channels(y_lr, 1, "network input")
    if params.scale not in SUPPORTED_SCALES:
        raise ConfigError(f"unsupported scale {params.scale}; supported: {SUPPORTED_SCALES}")
    outputs = []
    caches = []
    x = y_lr
    for lv in params.levels:
        x, cache = _level_fwd(x, lv, params, want_cache)
        outputs.append(x)
        caches.append(cache)
    return outputs, caches


def network_backward(grad_outputs, caches, params):
    """Parameter gradients given dLoss/d(output) for every pyramid level.

    A higher level's gradient flows into the level below through both the
    residual and the bicubic identity branch of the image chain.
    """
    grads = _Grads()
    g_carry = None
    for idx in range(len(params.levels) - 1, -1, -1):
        g_out = grad_outputs[idx]
        if g_carry is not None:
            g_out = g_out + g_carry
        g_carry = _level_bwd(
            g_out, caches[idx], params.levels[idx], params, grads,
            f"level{idx}", need_input_grad=idx > 0,
        )
    return dict(grads)
