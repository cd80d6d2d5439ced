"""Command-line interface: train / eval / infer / gradcheck / ablate / make-synthetic.

Exit codes: 0 on success, 2 for usage, path or config errors, 3 for
numerical failures (non-finite loss or gradients, failed gradient check).
The environment variable ``SRRU_THREADS`` caps the data worker count;
setting it to 1 forces the fully deterministic test mode.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from PIL import Image

from srru import checkpoint as ckpt
from srru import data, evaluate, metrics, model, presets, train
from srru.resample import bicubic_resize, quantize_u8, ycbcr_to_rgb
from srru.validation import (
    CheckpointError,
    ConfigError,
    CorpusError,
    NumericsError,
    ShapeError,
)

_ARCH_FIELDS = (
    "scale", "n_units", "channels", "reduction_ratio", "lrelu_slope",
    "attention_enabled", "fusion_enabled", "learnable_identity_branch",
)


def _worker_cap(config):
    cap = os.environ.get("SRRU_THREADS")
    if cap is None:
        return config
    workers = max(1, min(config.workers, int(cap)))
    return replace(config, workers=workers)


def _echo_config(config):
    print("# effective configuration")
    for line in train.config_to_text(config).splitlines():
        print(f"#   {line}")


def cmd_train(args):
    config = _worker_cap(train.load_config(args.config, args.override))
    _echo_config(config)
    manifest = data.load_corpus(config.train_dir)
    print(f"# corpus: {len(manifest.entries)} images from {manifest.root}")

    start_epoch = 0
    params = None
    state = None
    if args.resume:
        ck_config, params, state, start_epoch = ckpt.load_checkpoint(args.resume)
        for name in _ARCH_FIELDS:
            if getattr(ck_config, name) != getattr(config, name):
                raise ConfigError(
                    f"cannot resume: {name} differs (checkpoint {getattr(ck_config, name)}, "
                    f"config {getattr(config, name)})"
                )
        print(f"# resumed from {args.resume} at epoch {start_epoch}")

    out_dir = Path(config.out_dir) if config.out_dir else None
    log_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "log.csv"
        if not log_path.exists() or start_epoch == 0:
            log_path.write_text("epoch,loss,lr,wall_s\n", encoding="utf-8")

    def on_epoch(epoch, params, state, stats):
        line = f"{epoch},{stats.mean_loss:.6e},{stats.lr:.3e},{stats.wall_s:.2f}"
        print(f"epoch {line}")
        if log_path is not None:
            with open(log_path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
        if out_dir is not None and (epoch + 1) % config.checkpoint_every == 0:
            ckpt.save_checkpoint(out_dir / f"ckpt_epoch{epoch:04d}.srru", config, params, state, epoch + 1)
            ckpt.save_checkpoint(out_dir / "last.srru", config, params, state, epoch + 1)

    params, state, history = train.train_model(
        manifest, config, params=params, state=state,
        start_epoch=start_epoch, epoch_callback=on_epoch,
    )
    if out_dir is not None and history:
        ckpt.save_checkpoint(out_dir / "last.srru", config, params, state, config.epochs)
    if history:
        print(f"done: first-epoch loss {history[0].mean_loss:.6e}, last {history[-1].mean_loss:.6e}")
    else:
        print("done: no epochs to run")
    return 0


def cmd_eval(args):
    corpus = data.load_corpus(args.corpus, split="eval")
    params = None
    if not args.bicubic_only:
        if not args.ckpt:
            raise ConfigError("eval needs --ckpt unless --bicubic-only is set")
        ck_config, params, _, _ = ckpt.load_checkpoint(args.ckpt)
        if ck_config.scale != args.scale:
            raise ConfigError(
                f"checkpoint was trained for x{ck_config.scale}, requested x{args.scale}"
            )
    reports, baseline = evaluate.evaluate_manifest(
        corpus, args.scale, params, with_baseline=params is not None
    )
    title = "bicubic baseline" if params is None else f"model {args.ckpt}"
    print(metrics.reports_to_table(reports, args.scale, title=title))
    if baseline:
        print()
        print(metrics.reports_to_table(baseline, args.scale, title="bicubic baseline"))
    csv_text = metrics.reports_to_csv(reports, args.scale)
    if args.out_csv:
        Path(args.out_csv).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.out_csv}")
    else:
        print()
        print(csv_text, end="")
    return 0


def cmd_infer(args):
    ck_config, params, _, _ = ckpt.load_checkpoint(args.ckpt)
    scale = ck_config.scale
    try:
        y, cb, cr, is_color = data.load_ycbcr(args.input)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read image {args.input}: {exc}") from exc
    y_sr = evaluate.super_resolve_plane(y, params)
    if is_color:
        cb_sr = bicubic_resize(cb, float(scale), antialias=False)
        cr_sr = bicubic_resize(cr, float(scale), antialias=False)
        rgb = ycbcr_to_rgb(y_sr, cb_sr, cr_sr)
        out = np.clip(np.round(rgb), 0, 255).astype(np.uint8)
        Image.fromarray(out, mode="RGB").save(args.output)
    else:
        out = quantize_u8(y_sr).astype(np.uint8)
        Image.fromarray(out, mode="L").save(args.output)
    print(f"wrote {args.output} ({out.shape[1]}x{out.shape[0]}, x{scale})")
    return 0


def cmd_gradcheck(args):
    if args.config:
        config = train.load_config(args.config, args.override)
    else:
        config = train.gradcheck_config()
    if config.channels > 8 or config.n_units > 2:
        raise ConfigError(
            f"gradcheck wants a tiny model (channels <= 8, n_units <= 2), "
            f"got C={config.channels}, n={config.n_units}"
        )
    report = train.gradcheck(config)
    print(report.summary())
    return 0 if report.passed else 3


_ABLATION_ROWS = (
    ("fusion only", dict(fusion_enabled=True, attention_enabled=False, learnable_identity_branch=False)),
    ("attention only", dict(fusion_enabled=False, attention_enabled=True, learnable_identity_branch=False)),
    ("fusion+attention, two learnable branches", dict(fusion_enabled=True, attention_enabled=True, learnable_identity_branch=True)),
    ("fusion+attention, one learnable branch", dict(fusion_enabled=True, attention_enabled=True, learnable_identity_branch=False)),
)

_ABLATION_REFERENCE = "31.62 / 31.58 / 31.66 / 31.67 dB"


def run_ablation(config):
    """Train the four architecture variants under one seed/budget.

    Returns a list of (label, flags, mean PSNR, mean loss history) rows in
    the canonical order: fusion only, attention only, both with two
    learnable branches, both with one.
    """
    manifest = data.load_corpus(config.train_dir)
    val = data.load_corpus(config.val_dir, split="val") if config.val_dir else manifest
    rows = []
    for label, flags in _ABLATION_ROWS:
        variant = replace(config, out_dir="", **flags)
        params, _, history = train.train_model(manifest, variant)
        reports, _ = evaluate.evaluate_manifest(val, variant.scale, params)
        rows.append((label, flags, reports[-1].psnr, history[-1].mean_loss))
    return rows


def cmd_ablate(args):
    config = _worker_cap(train.load_config(args.config, args.override))
    _echo_config(config)
    steps = config.epochs * max(1, config.per_image) // max(1, config.batch_size)
    print(f"# all runs share seed={config.rng_seed}, epochs={config.epochs} "
          f"(~{steps} steps/image-group), corpus={config.train_dir}")
    rows = run_ablation(config)
    print(f"{'variant':<42} {'fusion':>6} {'attn':>5} {'branches':>8} {'psnr_db':>8}")
    for label, flags, psnr, _ in rows:
        branches = "two" if flags["learnable_identity_branch"] else "one"
        print(f"{label:<42} {str(flags['fusion_enabled']):>6} {str(flags['attention_enabled']):>5} "
              f"{branches:>8} {psnr:8.2f}")
    print(f"# published full-scale reference for these rows (Set5 x4): {_ABLATION_REFERENCE};")
    print("# desk-scale numbers above are not comparable to it.")
    return 0


def cmd_make_synthetic(args):
    manifest = data.make_synthetic_corpus(args.out, args.count, args.size, args.seed)
    print(f"wrote {len(manifest.entries)} images of {args.size}x{args.size} to {manifest.root}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="srru",
        description="Recursive channel-attention super-resolution toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("train", help="train a model from a config file", formatter_class=fmt)
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--override", action="append", default=[], metavar="K=V",
                   help="override one config key (repeatable)")
    p.add_argument("--resume", default="", help="checkpoint file to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or the bicubic baseline", formatter_class=fmt)
    p.add_argument("--ckpt", default="", help="checkpoint file (omit with --bicubic-only)")
    p.add_argument("--corpus", required=True, help="directory of ground-truth images")
    p.add_argument("--scale", type=int, choices=(2, 4), required=True, help="upscaling factor")
    p.add_argument("--bicubic-only", action="store_true", help="evaluate plain bicubic upscaling")
    p.add_argument("--out-csv", default="", help="write per-image metrics CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="super-resolve one image", formatter_class=fmt)
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--in", dest="input", required=True, help="input image (PNG/BMP)")
    p.add_argument("--out", dest="output", required=True, help="output PNG path")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter gradient", formatter_class=fmt)
    p.add_argument("--config", default="", help="optional config file (tiny model)")
    p.add_argument("--override", action="append", default=[], metavar="K=V",
                   help="override one config key (repeatable)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="train the four architecture variants and report PSNR", formatter_class=fmt)
    p.add_argument("--config", required=True, help="desk-scale config file")
    p.add_argument("--override", action="append", default=[], metavar="K=V",
                   help="override one config key (repeatable)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("make-synthetic", help="generate a deterministic synthetic corpus", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=8, help="number of images")
    p.add_argument("--size", type=int, default=96, help="image side length in px")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.set_defaults(func=cmd_make_synthetic)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except (ConfigError, CorpusError, CheckpointError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
