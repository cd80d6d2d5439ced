import numpy as np
import pytest

from srru import data


@pytest.fixture(scope="session")
def train_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus") / "train"
    return data.make_synthetic_corpus(root, count=8, size=96, rng_seed=0)


@pytest.fixture(scope="session")
def val_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus") / "val"
    return data.make_synthetic_corpus(root, count=4, size=96, rng_seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def numeric_grad(f, x, step=1e-5):
    """Central-difference gradient of scalar f over every entry of x."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        up = f()
        flat[i] = keep - step
        down = f()
        flat[i] = keep
        out[i] = (up - down) / (2.0 * step)
    return grad


def max_rel_err(analytic, numeric, floor=1e-8):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
