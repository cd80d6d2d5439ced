"""Scikit-learn-style estimator facade over the training and inference stack.

``SuperResolver`` follows the sklearn estimator contract (``get_params`` /
``set_params`` / ``fit`` returning self / trailing-underscore fitted
attributes) without importing scikit-learn, so ``sklearn.base.clone`` and
pipeline tooling work with it while the package keeps zero ML-framework
dependencies. ``fit`` accepts either a corpus directory or an in-memory
sequence of 2-D HR arrays; ``predict``/``transform`` map LR planes to
SR planes.
"""

from __future__ import annotations

import inspect

import numpy as np

from srru import data, model, train
from srru.metrics import psnr_y
from srru.resample import PLANE_SCALE, quantize_u8
from srru.validation import check_plane


class SuperResolver:
    """Single-image super-resolution estimator (x2 or x4).

    Defaults are desk-scale so that ``fit`` completes in minutes on CPU;
    raise ``channels``/``n_units``/``epochs`` toward the full-scale recipe
    as compute allows.
    """

    def __init__(
        self,
        scale=2,
        channels=16,
        n_units=2,
        reduction_ratio=4,
        lrelu_slope=0.2,
        learning_rate=4e-3,
        lr_halving_epochs=100,
        batch_size=8,
        patch_size=48,
        epochs=10,
        per_image=30,
        loss_kind="charbonnier",
        momentum=0.9,
        weight_decay=1e-4,
        attention_enabled=True,
        fusion_enabled=True,
        learnable_identity_branch=False,
        rng_seed=0,
    ):
        self.scale = scale
        self.channels = channels
        self.n_units = n_units
        self.reduction_ratio = reduction_ratio
        self.lrelu_slope = lrelu_slope
        self.learning_rate = learning_rate
        self.lr_halving_epochs = lr_halving_epochs
        self.batch_size = batch_size
        self.patch_size = patch_size
        self.epochs = epochs
        self.per_image = per_image
        self.loss_kind = loss_kind
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.attention_enabled = attention_enabled
        self.fusion_enabled = fusion_enabled
        self.learnable_identity_branch = learnable_identity_branch
        self.rng_seed = rng_seed

    @classmethod
    def _param_names(cls):
        return [p for p in inspect.signature(cls.__init__).parameters if p != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for SuperResolver")
            setattr(self, key, value)
        return self

    def _config(self):
        return train.TrainingConfig(
            scale=self.scale,
            channels=self.channels,
            n_units=self.n_units,
            reduction_ratio=self.reduction_ratio,
            lrelu_slope=self.lrelu_slope,
            learning_rate=self.learning_rate,
            lr_halving_epochs=self.lr_halving_epochs,
            batch_size=self.batch_size,
            patch_size=self.patch_size,
            epochs=self.epochs,
            per_image=self.per_image,
            loss_kind=self.loss_kind,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            attention_enabled=self.attention_enabled,
            fusion_enabled=self.fusion_enabled,
            learnable_identity_branch=self.learnable_identity_branch,
            rng_seed=self.rng_seed,
            out_dir="",
        ).validate()

    def fit(self, X, y=None):
        """Train on HR images: a corpus directory path or a list of 2-D arrays."""
        config = self._config()
        params = train.build_from_config(config)
        state = train.OptimizerState.for_params(model.named_parameters(params), config.learning_rate)
        history = []
        if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
            manifest = data.load_corpus(X)
            for epoch in range(config.epochs):
                state.lr = train.lr_schedule(epoch, config)
                batches = train.epoch_batches(manifest, config, epoch)
                history.append(train.train_epoch(params, batches, config, state, epoch))
        else:
            planes = [check_plane(p, f"X[{i}]") for i, p in enumerate(X)]
            ids = [f"array{i}" for i in range(len(planes))]
            for epoch in range(config.epochs):
                state.lr = train.lr_schedule(epoch, config)
                seed = (config.rng_seed * 1_000_003 + epoch) % (2 ** 63)
                pairs = data.make_patches_from_planes(
                    planes, ids, config.patch_size, config.per_image, config.scale, seed
                )
                batches = train.batch_stream(pairs, config.batch_size)
                history.append(train.train_epoch(params, batches, config, state, epoch))
        self.network_ = params
        self.optimizer_state_ = state
        self.history_ = history
        return self

    def _require_fitted(self):
        if not hasattr(self, "network_"):
            raise RuntimeError("this SuperResolver is not fitted yet; call fit first")

    def predict(self, X):
        """Super-resolve LR planes ([0,255] 2-D arrays) by the fitted network.

        Accepts one plane or a sequence; returns the same structure with
        every plane upscaled by the configured factor, on the 8-bit grid.
        """
        self._require_fitted()
        single = isinstance(X, np.ndarray) and X.ndim == 2
        planes = [X] if single else list(X)
        outputs = []
        for plane in planes:
            plane = check_plane(plane, "lr plane")
            x = plane[None, None] / PLANE_SCALE
            sr = model.network_forward(x, self.network_)[-1][0, 0] * PLANE_SCALE
            outputs.append(quantize_u8(sr))
        return outputs[0] if single else outputs

    def transform(self, X):
        return self.predict(X)

    def score(self, X, y=None):
        """Mean PSNR (dB) of reconstructions over HR planes or a corpus dir."""
        self._require_fitted()
        if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
            manifest = data.load_corpus(X, split="score")
            planes = [data.load_luma(e.path) for e in manifest.entries]
        else:
            planes = [check_plane(p, "hr plane") for p in X]
        from srru.evaluate import reconstruct_image

        values = []
        for plane in planes:
            hr, sr = reconstruct_image(plane, self.scale, self.network_)
            values.append(psnr_y(hr, sr, shave=self.scale))
        return float(np.mean(values))
