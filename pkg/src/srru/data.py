"""Corpus ingestion, LR synthesis, patch extraction and augmentation.

Images enter as PNG (or read-only BMP) files, are reduced to their luma
plane, and leave as aligned LR/HR patch pairs. A procedural synthetic
corpus generator keeps the whole training path runnable without any
benchmark downloads. The pipeline is deterministic: (corpus, seed, config)
fully determines the emitted stream, and per-image seeds are derived
independently of the worker count.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from srru.resample import PLANE_SCALE, bicubic_resize, modcrop, quantize_u8, rgb_to_ycbcr
from srru.validation import CorpusError, check_plane

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".bmp")

# Source rescale factors drawn during augmentation, applied before cropping.
AUGMENT_SCALES = (1.0, 0.9, 0.8, 0.7, 0.6)


@dataclass
class CorpusEntry:
    path: Path
    width: int
    height: int
    checksum: str


@dataclass
class CorpusManifest:
    root: Path
    split: str
    entries: list[CorpusEntry]
    notes: list[str] = field(default_factory=list)


@dataclass
class SamplePair:
    """One training sample: LR input and the HR target per pyramid level.

    Tensors are (1, 1, h, w) float32, normalized to [0, 1); hr[level] is
    exactly 2^(level+1) times the LR size.
    """

    lr: np.ndarray
    hr: list[np.ndarray]
    source_id: str
    augmentation_tag: str


def load_luma(path):
    """Read an image file as a float64 Y plane on the 8-bit grid [0, 255]."""
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "I"):
            plane = np.asarray(img.convert("L"), dtype=np.float64)
        else:
            y, _, _ = rgb_to_ycbcr(np.asarray(img.convert("RGB")))
            plane = quantize_u8(y)
    return plane


def load_ycbcr(path):
    """Read an image as (y, cb, cr, was_color) float planes."""
    with Image.open(path) as img:
        if img.mode == "L":
            plane = np.asarray(img, dtype=np.float64)
            return plane, None, None, False
        y, cb, cr = rgb_to_ycbcr(np.asarray(img.convert("RGB")))
    return y, cb, cr, True


def load_corpus(path, split="train"):
    """Scan a directory of PNG/BMP files into a manifest, sorted by name."""
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    entries = []
    notes = []
    for file in sorted(root.iterdir(), key=lambda p: p.name):
        if file.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        try:
            with Image.open(file) as img:
                width, height = img.size
        except Exception as exc:
            log.warning("skipping unreadable image %s: %s", file, exc)
            notes.append(f"skipped {file.name}: {exc}")
            continue
        checksum = hashlib.sha256(file.read_bytes()).hexdigest()
        entries.append(CorpusEntry(file, width, height, checksum))
    if not entries:
        raise CorpusError(f"no readable PNG/BMP images in {root}")
    return CorpusManifest(root=root, split=split, entries=entries, notes=notes)


def save_manifest(manifest, path):
    lines = [f"{e.path.name}\t{e.width}\t{e.height}\t{e.checksum}" for e in manifest.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path, root=None):
    root = Path(root) if root is not None else Path(path).parent
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        name, width, height, checksum = line.split("\t")
        entries.append(CorpusEntry(root / name, int(width), int(height), checksum))
    if not entries:
        raise CorpusError(f"manifest {path} lists no images")
    return CorpusManifest(root=root, split="manifest", entries=entries)


def synthesize_lr(hr, scale):
    """Antialiased bicubic downscale; crops HR to a multiple of scale first."""
    hr = modcrop(hr, scale)
    return bicubic_resize(hr, 1.0 / scale, antialias=True)


def _plane_to_tensor(plane):
    return (plane[None, None, :, :] / PLANE_SCALE).astype(np.float32)


def _pair_from_hr_patch(hr_patch, scale, source_id, tag):
    # Canonicalize the HR patch to the float32 grid the tensors live on, so
    # the stored LR is always the exact downscale of the stored HR even
    # after augmentation round trips.
    hr_patch = np.float32(hr_patch / PLANE_SCALE).astype(np.float64) * PLANE_SCALE
    levels = scale.bit_length() - 1
    targets = []
    for level in range(levels):
        factor = 2 ** (level + 1)
        if factor == scale:
            targets.append(hr_patch)
        else:
            targets.append(bicubic_resize(hr_patch, factor / scale, antialias=True))
    lr = bicubic_resize(hr_patch, 1.0 / scale, antialias=True)
    return SamplePair(
        lr=_plane_to_tensor(lr),
        hr=[_plane_to_tensor(t) for t in targets],
        source_id=source_id,
        augmentation_tag=tag,
    )


def augment(pair, rng):
    """Random right-angle rotation and horizontal flip of one sample pair.

    The transform is applied to the HR patch and the LR input (and any
    intermediate pyramid targets) are re-synthesized from it, so the pair
    stays exactly consistent. The identity draw returns the pair unchanged.
    """
    k = int(rng.integers(0, 4))
    flip = bool(rng.integers(0, 2))
    if k == 0 and not flip:
        return pair
    scale = 2 ** len(pair.hr)
    hr_patch = pair.hr[-1][0, 0] * PLANE_SCALE
    hr_patch = np.rot90(hr_patch, k)
    if flip:
        hr_patch = np.fliplr(hr_patch)
    tag = pair.augmentation_tag + f"+rot{90 * k}" + ("+flip" if flip else "")
    return _pair_from_hr_patch(np.ascontiguousarray(hr_patch), scale, pair.source_id, tag)


def _patches_for_plane(plane, source_id, patch, per_image, scale, seed):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(per_image):
        factor = float(rng.choice(AUGMENT_SCALES))
        src = plane if factor == 1.0 else bicubic_resize(plane, factor, antialias=True)
        if min(src.shape) < patch:
            # Too small to crop from: stretch up to patch size and note it.
            up = patch / min(src.shape)
            src = bicubic_resize(src, up, antialias=False)
            log.info("%s: rescaled %.2fx up to fit patch size %d", source_id, up, patch)
        y0 = int(rng.integers(0, src.shape[0] - patch + 1))
        x0 = int(rng.integers(0, src.shape[1] - patch + 1))
        hr_patch = src[y0:y0 + patch, x0:x0 + patch]
        tag = f"scale{factor}"
        pair = _pair_from_hr_patch(hr_patch, scale, source_id, tag)
        pairs.append(augment(pair, rng))
    return pairs


def make_patches(manifest, patch, per_image, scale, rng_seed, workers=1):
    """Yield augmented SamplePairs, ``per_image`` from each corpus image.

    Fully determined by (corpus, patch, per_image, scale, rng_seed); the
    per-image seeds come from a spawned seed sequence, so the stream is
    identical for every worker count.
    """
    if patch % scale != 0:
        raise CorpusError(f"patch size {patch} not divisible by scale {scale}")
    if per_image <= 0:
        return
    seeds = np.random.SeedSequence(rng_seed).spawn(len(manifest.entries))

    def job(args):
        entry, seed = args
        plane = load_luma(entry.path)
        return _patches_for_plane(plane, entry.path.stem, patch, per_image, scale, seed)

    jobs = list(zip(manifest.entries, seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for pairs in pool.map(job, jobs):
                yield from pairs
    else:
        for item in jobs:
            yield from job(item)


def make_patches_from_planes(planes, ids, patch, per_image, scale, rng_seed):
    """Patch stream over in-memory HR planes (no files involved)."""
    if patch % scale != 0:
        raise CorpusError(f"patch size {patch} not divisible by scale {scale}")
    if per_image <= 0:
        return
    seeds = np.random.SeedSequence(rng_seed).spawn(len(planes))
    for plane, source_id, seed in zip(planes, ids, seeds):
        plane = check_plane(plane, source_id)
        yield from _patches_for_plane(plane, source_id, patch, per_image, scale, seed)


# ---------------------------------------------------------------------------
# synthetic corpus


def _synthetic_plane(size, rng):
    """Procedural test image: gradient, oriented sinusoids, soft-edged shapes.

    Wavelengths stay above 5 px so a 2x downscale keeps the content
    representable, but enough energy sits near the band edge that plain
    bicubic reconstruction loses several dB, leaving real headroom for a
    learned model.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = rng.uniform(0, 2 * np.pi)
    img = 0.5 * ((np.cos(theta) * xx + np.sin(theta) * yy) / size - 0.5)

    for _ in range(int(rng.integers(3, 7))):
        angle = rng.uniform(0, np.pi)
        wavelength = rng.uniform(5.0, 20.0)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.25, 0.6)
        img += amp * np.sin(2 * np.pi * (np.cos(angle) * xx + np.sin(angle) * yy) / wavelength + phase)

    for _ in range(int(rng.integers(3, 7))):
        cy, cx = rng.uniform(0.15 * size, 0.85 * size, size=2)
        radius = rng.uniform(0.06 * size, 0.2 * size)
        edge = rng.uniform(0.5, 1.2)
        amp = rng.uniform(-0.7, 0.7)
        dist = np.hypot(yy - cy, xx - cx)
        img += amp / (1.0 + np.exp((dist - radius) / edge))

    img -= img.mean()
    std = img.std()
    if std > 0:
        img *= 45.0 / std
    return np.clip(np.round(img + 128.0), 0, 255).astype(np.uint8)


def make_synthetic_corpus(path, count, size, rng_seed):
    """Write ``count`` deterministic synthetic PNGs and return their manifest."""
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CorpusError(f"cannot create corpus directory {root}: {exc}") from exc
    seeds = np.random.SeedSequence(rng_seed).spawn(count)
    for i, seed in enumerate(seeds):
        plane = _synthetic_plane(size, np.random.default_rng(seed))
        Image.fromarray(plane, mode="L").save(root / f"synth_{i:03d}.png")
    return load_corpus(root, split="synthetic")
