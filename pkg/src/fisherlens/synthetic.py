"""Seeded synthetic dataset: three classes of noisy block patterns.

Each class mean is a distinct bright block on a dark background, with additive
Gaussian pixel noise drawn from the package PRNG. The classes are linearly
separable by construction, which makes the generator a ground-truth oracle for
the whole train/predict/eval pipeline without any external data.

Run ``python -m fisherlens.synthetic --out DIR`` to materialize the dataset as
PGM files plus a manifest, ready for the train/eval commands.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import netpbm
from .dataset import DEFAULT_SEED, DatasetManifest, EmotionLabel, Rng, SampleRecord
from .imgproc import GrayImage, round_half_up

BLOB_LABELS = (EmotionLabel.happy, EmotionLabel.anger, EmotionLabel.surprise)

_BACKGROUND = 60.0
_FOREGROUND = 200.0


def class_pattern(index: int, size: int = 16) -> np.ndarray:
    """Mean image for class ``index``: a bright block in a distinct position."""
    if not 0 <= index < len(BLOB_LABELS):
        raise ValueError(f"class index must be in 0..{len(BLOB_LABELS) - 1}, got {index}")
    if size < 4:
        raise ValueError(f"size must be >= 4, got {size}")
    pattern = np.full((size, size), _BACKGROUND)
    h = size // 2
    q = size // 4
    if index == 0:  # top-left quadrant
        pattern[:h, :h] = _FOREGROUND
    elif index == 1:  # bottom-right quadrant
        pattern[h:, h:] = _FOREGROUND
    else:  # centered block
        pattern[q : q + h, q : q + h] = _FOREGROUND
    return pattern


def make_blob_faces(
    per_class: int = 30,
    size: int = 16,
    sigma: float = 10.0,
    seed: int = DEFAULT_SEED,
):
    """Generate (faces, labels) with ``sigma`` counts of noise per pixel."""
    if per_class < 1:
        raise ValueError(f"per_class must be positive, got {per_class}")
    rng = Rng(seed)
    faces = []
    labels = []
    for ci, label in enumerate(BLOB_LABELS):
        pattern = class_pattern(ci, size)
        for _ in range(per_class):
            noise = np.array([rng.gauss() for _ in range(size * size)])
            noisy = pattern + sigma * noise.reshape(size, size)
            pixels = np.clip(round_half_up(noisy), 0, 255).astype(np.uint8)
            faces.append(GrayImage(pixels))
            labels.append(label)
    return faces, labels


def write_blob_dataset(
    root,
    per_class: int = 30,
    size: int = 16,
    sigma: float = 10.0,
    seed: int = DEFAULT_SEED,
) -> DatasetManifest:
    """Write the generated faces as PGM files under ``root`` plus a manifest.

    Layout matches prepared datasets: root/<emotion>/<subject>_<session>.pgm.
    The manifest lands at root/manifest.json. Deterministic for a given seed.
    """
    faces, labels = make_blob_faces(per_class, size, sigma, seed)
    records = []
    counters: dict = {}
    for face, label in zip(faces, labels):
        k = counters.get(label, 0)
        counters[label] = k + 1
        out_dir = os.path.join(root, label.name)
        os.makedirs(out_dir, exist_ok=True)
        subject, session = f"blob_{label.name}", f"{k:03d}"
        path = os.path.join(out_dir, f"{subject}_{session}.pgm")
        netpbm.write_image(face, path)
        records.append(SampleRecord(path, label, subject, session))
    manifest = DatasetManifest(size, size, records)
    manifest.save(os.path.join(root, "manifest.json"))
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m fisherlens.synthetic",
        description="generate the synthetic block-pattern demo dataset",
    )
    parser.add_argument("--out", default="demo_data", help="output directory")
    parser.add_argument("--per-class", type=int, default=30)
    parser.add_argument("--size", type=int, default=16)
    parser.add_argument("--sigma", type=float, default=10.0)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = parser.parse_args(argv)
    try:
        manifest = write_blob_dataset(
            args.out, args.per_class, args.size, args.sigma, args.seed
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(manifest)} samples to {args.out} (manifest.json alongside)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
