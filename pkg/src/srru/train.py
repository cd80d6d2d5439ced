"""Loss, optimizer, LR schedule, the training loop, and the gradient checker.

Defaults mirror the full-scale recipe (learning rate 1e-5 halved every 80
epochs, batch 64, HR patch 128, 6 shared recursive units, 64 channels,
reduction ratio 4). The loss is Charbonnier with per-level deep supervision;
the optimizer is SGD with momentum. A desk-scale preset that trains in
minutes on CPU lives in :mod:`srru.presets`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields

import numpy as np

from srru import data, model
from srru.validation import ConfigError, NumericsError

LOSS_KINDS = ("charbonnier", "l2")
OPTIMIZER_KINDS = ("sgd", "sgd_momentum")


@dataclass
class TrainingConfig:
    scale: int = 2
    n_units: int = 6
    channels: int = 64
    reduction_ratio: int = 4
    lrelu_slope: float = 0.2
    learning_rate: float = 1e-5
    lr_halving_epochs: int = 80
    batch_size: int = 64
    patch_size: int = 128
    epochs: int = 160
    per_image: int = 32
    loss_kind: str = "charbonnier"
    charbonnier_eps: float = 1e-3
    optimizer_kind: str = "sgd_momentum"
    momentum: float = 0.9
    weight_decay: float = 1e-4
    grad_clip: float = 0.0
    rng_seed: int = 0
    attention_enabled: bool = True
    fusion_enabled: bool = True
    learnable_identity_branch: bool = False
    workers: int = 1
    checkpoint_every: int = 1
    train_dir: str = ""
    val_dir: str = ""
    out_dir: str = "runs/default"

    def validate(self):
        if self.scale not in model.SUPPORTED_SCALES:
            raise ConfigError(f"unsupported scale {self.scale}")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.optimizer_kind not in OPTIMIZER_KINDS:
            raise ConfigError(
                f"optimizer_kind must be one of {OPTIMIZER_KINDS}, got {self.optimizer_kind!r}"
            )
        if self.patch_size % self.scale != 0:
            raise ConfigError(f"patch_size {self.patch_size} not divisible by scale {self.scale}")
        if self.channels % self.reduction_ratio != 0:
            raise ConfigError(
                f"channels {self.channels} not divisible by reduction_ratio {self.reduction_ratio}"
            )
        if not 0.0 < self.lrelu_slope < 1.0:
            raise ConfigError(f"lrelu_slope must be in (0,1), got {self.lrelu_slope}")
        return self


def config_fields():
    return {f.name: f.type for f in fields(TrainingConfig)}


def _coerce(name, kind, raw):
    raw = raw.strip()
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        if kind in ("bool", bool):
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


def parse_config_text(text):
    """Parse line-oriented ``key = value`` text with ``#`` comments."""
    kinds = config_fields()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, kinds[key], raw)
    return values


def load_config(path, overrides=()):
    """TrainingConfig from a config file plus ``key=value`` override strings."""
    from pathlib import Path

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values = parse_config_text(text)
    values.update(parse_overrides(overrides))
    return TrainingConfig(**values).validate()


def parse_overrides(overrides):
    kinds = config_fields()
    values = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in kinds:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, kinds[key], raw)
    return values


def config_to_text(config):
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in fields(TrainingConfig)]
    return "\n".join(lines) + "\n"


def build_from_config(config, dtype=np.float32):
    return model.build_network(
        scale=config.scale,
        channels=config.channels,
        n_units=config.n_units,
        reduction_ratio=config.reduction_ratio,
        lrelu_slope=config.lrelu_slope,
        attention=config.attention_enabled,
        fusion=config.fusion_enabled,
        learnable_identity=config.learnable_identity_branch,
        rng=config.rng_seed,
        dtype=dtype,
    )


# ---------------------------------------------------------------------------
# loss


def charbonnier_loss(pred, target, eps=1e-3):
    """Differentiable L1 surrogate: mean sqrt(diff^2 + eps^2) and its gradient."""
    if pred.shape != target.shape:
        raise ConfigError(f"loss shapes differ: {pred.shape} vs {target.shape}")
    if eps <= 0:
        raise ConfigError(f"charbonnier eps must be positive, got {eps}")
    diff = pred - target
    root = np.sqrt(diff * diff + eps * eps)
    loss = float(root.mean())
    grad = diff / root / diff.size
    return loss, grad


def l2_loss(pred, target):
    if pred.shape != target.shape:
        raise ConfigError(f"loss shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


def loss_fn(kind, eps=1e-3):
    if kind == "charbonnier":
        return lambda p, t: charbonnier_loss(p, t, eps)
    if kind == "l2":
        return l2_loss
    raise ConfigError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    velocity: dict[str, np.ndarray]
    step: int = 0
    lr: float = 0.0

    @classmethod
    def for_params(cls, named, lr):
        return cls(velocity={k: np.zeros_like(v) for k, v in named.items()}, step=0, lr=lr)


def sgd_step(named_params, grads, state, config):
    """One in-place SGD-with-momentum update over named parameter arrays."""
    momentum = config.momentum if config.optimizer_kind == "sgd_momentum" else 0.0
    for name, w in named_params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite gradient for parameter {name} at step {state.step}")
        g = g + config.weight_decay * w
        v = state.velocity[name]
        v *= momentum
        v -= state.lr * g
        w += v
    state.step += 1
    return state


def lr_schedule(epoch, config):
    """Base learning rate halved every ``lr_halving_epochs`` epochs."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return config.learning_rate * 0.5 ** (epoch // config.lr_halving_epochs)


def clip_gradients(grads, max_norm):
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        grads = {k: g * factor for k, g in grads.items()}
    return grads, total


# ---------------------------------------------------------------------------
# batching and the epoch loop


def batch_stream(pairs, batch_size):
    """Group SamplePairs into (lr_batch, [target per level]) tuples."""
    chunk = []
    for pair in pairs:
        chunk.append(pair)
        if len(chunk) == batch_size:
            yield _stack(chunk)
            chunk = []
    if chunk:
        yield _stack(chunk)


def _stack(chunk):
    x = np.concatenate([p.lr for p in chunk], axis=0)
    levels = len(chunk[0].hr)
    targets = [np.concatenate([p.hr[lv] for p in chunk], axis=0) for lv in range(levels)]
    return x, targets


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    grad_norm: float
    lr: float
    wall_s: float
    steps: int


def train_epoch(params, batches, config, state, epoch=0):
    """Run every batch once: forward, deep-supervised loss, backward, update."""
    named = model.named_parameters(params)
    loss = loss_fn(config.loss_kind, config.charbonnier_eps)
    losses = []
    norms = []
    start = time.perf_counter()
    for index, (x, targets) in enumerate(batches):
        outputs, caches = model.network_forward_cached(x, params)
        grad_outputs = []
        total = 0.0
        for out, target in zip(outputs, targets):
            value, grad = loss(out, target)
            total += value
            grad_outputs.append(grad)
        if not np.isfinite(total):
            raise NumericsError(f"non-finite loss at epoch {epoch} batch {index}")
        grads = model.network_backward(grad_outputs, caches, params)
        grads, norm = clip_gradients(grads, config.grad_clip)
        sgd_step(named, grads, state, config)
        losses.append(total)
        norms.append(norm)
    wall = time.perf_counter() - start
    if not losses:
        raise ConfigError("empty batch stream; nothing to train on")
    return EpochStats(
        epoch=epoch,
        mean_loss=float(np.mean(losses)),
        grad_norm=float(np.mean(norms)),
        lr=state.lr,
        wall_s=wall,
        steps=len(losses),
    )


def epoch_batches(manifest, config, epoch):
    """Deterministic batch stream for one epoch (seed varies by epoch)."""
    seed = (config.rng_seed * 1_000_003 + epoch) % (2 ** 63)
    pairs = data.make_patches(
        manifest,
        config.patch_size,
        config.per_image,
        config.scale,
        seed,
        workers=config.workers,
    )
    return batch_stream(pairs, config.batch_size)


def train_model(manifest, config, params=None, state=None, start_epoch=0, epoch_callback=None):
    """Train for config.epochs epochs; returns (params, state, history)."""
    config.validate()
    if params is None:
        params = build_from_config(config)
    if state is None:
        state = OptimizerState.for_params(model.named_parameters(params), config.learning_rate)
    history = []
    for epoch in range(start_epoch, config.epochs):
        state.lr = lr_schedule(epoch, config)
        stats = train_epoch(params, epoch_batches(manifest, config, epoch), config, state, epoch)
        history.append(stats)
        if epoch_callback is not None:
            epoch_callback(epoch, params, state, stats)
    return params, state, history


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    layer_errors: dict[str, float]
    max_rel_err: float
    threshold: float
    passed: bool

    def failing_layers(self):
        return [k for k, v in self.layer_errors.items() if v >= self.threshold]

    def summary(self):
        lines = [f"gradient check (threshold {self.threshold:g}):"]
        for name, err in sorted(self.layer_errors.items(), key=lambda kv: -kv[1]):
            mark = "FAIL" if err >= self.threshold else "ok  "
            lines.append(f"  {mark} {name:<42} max rel err {err:.3e}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} (max {self.max_rel_err:.3e})")
        return "\n".join(lines)


def gradcheck_config(**overrides):
    base = dict(
        scale=2, n_units=2, channels=8, reduction_ratio=4, patch_size=16,
        batch_size=1, epochs=0, train_dir="", out_dir="",
    )
    base.update(overrides)
    return TrainingConfig(**base).validate()


def gradcheck(config=None, input_hw=(8, 8), step=1e-5, threshold=1e-4, rng_seed=0):
    """Compare every parameter's analytic gradient to central differences.

    Runs the full network double precision on a tiny random input with a
    Charbonnier loss per pyramid level; gradients of the shared unit
    accumulate over all recursion applications and are checked as such.
    """
    if config is None:
        config = gradcheck_config()
    rng = np.random.default_rng(rng_seed)
    params = build_from_config(config)
    params = model.cast_network(params, np.float64)
    named = model.named_parameters(params)

    x = rng.uniform(0.05, 0.95, size=(1, 1) + tuple(input_hw))
    targets = [
        rng.uniform(0.0, 1.0, size=(1, 1, input_hw[0] * 2 ** (lv + 1), input_hw[1] * 2 ** (lv + 1)))
        for lv in range(len(params.levels))
    ]
    loss = loss_fn(config.loss_kind, config.charbonnier_eps)

    def total_loss():
        outputs = model.network_forward(x, params)
        values_and_grads = [loss(out, t) for out, t in zip(outputs, targets)]
        return sum(v for v, _ in values_and_grads), [g for _, g in values_and_grads]

    _, grad_outputs = total_loss()
    _, caches = model.network_forward_cached(x, params)
    analytic = model.network_backward(grad_outputs, caches, params)

    layer_errors = {}
    for name, w in named.items():
        a = analytic[name]
        worst = 0.0
        flat = w.reshape(-1)
        a_flat = a.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up, _ = total_loss()
            flat[i] = keep - step
            down, _ = total_loss()
            flat[i] = keep
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
        layer_errors[name] = worst
    max_err = max(layer_errors.values())
    return GradCheckReport(
        layer_errors=layer_errors,
        max_rel_err=max_err,
        threshold=threshold,
        passed=max_err < threshold,
    )
