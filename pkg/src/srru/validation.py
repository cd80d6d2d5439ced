"""Input validation helpers and the package's exception types.

Arrays flow through the library as plain numpy ndarrays with fixed
conventions: feature tensors are 4-D ``(batch, channels, height, width)``,
image planes are 2-D float64. The helpers here enforce those conventions at
module boundaries and raise errors that name the offending dimension.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """An array dimension violates an operation's contract."""


class ConfigError(ValueError):
    """A configuration file or flag value is invalid."""


class CorpusError(ValueError):
    """An image corpus is empty or unusable."""


class CheckpointError(ValueError):
    """A checkpoint file is malformed or mismatched."""


class NumericsError(ArithmeticError):
    """A numerical failure (NaN/Inf) was detected during training."""


def check_tensor(x, name="tensor"):
    """Require a 4-D (batch, channels, height, width) array."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError(f"{name}: expected 4 dims (batch, channels, height, width), got {x.ndim}")
    if min(x.shape) < 1:
        raise ShapeError(f"{name}: all dims must be >= 1, got shape {x.shape}")
    return x


def check_plane(x, name="plane"):
    """Require a 2-D image plane, returned as float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"{name}: expected 2 dims (height, width), got {x.ndim}")
    if min(x.shape) < 1:
        raise ShapeError(f"{name}: all dims must be >= 1, got shape {x.shape}")
    return x


def check_same_shape(a, b, name_a="a", name_b="b"):
    if a.shape != b.shape:
        raise ShapeError(f"{name_a} shape {a.shape} != {name_b} shape {b.shape}")


def check_channels(x, expected, name="input"):
    if x.shape[1] != expected:
        raise ShapeError(f"{name}: expected {expected} channels, got {x.shape[1]}")


def check_spatial_match(a, b, name_a="a", name_b="b"):
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(
            f"{name_a} batch/spatial {a.shape[0]}x{a.shape[2:]} != "
            f"{name_b} {b.shape[0]}x{b.shape[2:]}"
        )


def check_finite(x, name="array"):
    if not np.all(np.isfinite(x)):
        raise NumericsError(f"{name} contains non-finite values")
    return x
