"""Shipped configurations.

``desk_config`` is sized to train end-to-end on a laptop CPU in minutes:
synthetic corpus, 16 channels, 2 recursive units, 48 px HR patches, batch 8,
300 optimizer steps total (10 epochs of 30 steps). The learning rate is far
above the full-scale value because the run is 3 orders of magnitude shorter.
"""

from srru.train import TrainingConfig

DESK_OVERRIDES = dict(
    scale=2,
    n_units=2,
    channels=16,
    reduction_ratio=4,
    learning_rate=2e-3,
    lr_halving_epochs=100,
    batch_size=8,
    patch_size=48,
    epochs=10,
    per_image=30,
    momentum=0.9,
    weight_decay=1e-4,
    rng_seed=0,
    out_dir="runs/desk",
)


def desk_config(**overrides):
    values = dict(DESK_OVERRIDES)
    values.update(overrides)
    return TrainingConfig(**values).validate()


def desk_config_text():
    """The desk preset as a config file body."""
    cfg = desk_config()
    keys = sorted(DESK_OVERRIDES)
    lines = ["# desk-scale preset: trains in minutes on CPU"]
    lines += [f"{k} = {getattr(cfg, k)}" for k in keys]
    return "\n".join(lines) + "\n"
