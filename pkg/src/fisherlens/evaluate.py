"""Seeded train/test trials: repeated stratified splits, confusion matrices,
accuracy statistics and report rendering.

Each trial t draws its split from a fresh PRNG seeded with seed XOR t, so
trials are independent yet the whole experiment is reproducible from one
number. Trials retrain from scratch; only decoded images are cached across
trials.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import netpbm
from .dataset import DatasetManifest, Rng, split
from .errors import FisherlensError
from .fisherface import SampleMatrix, predict, train_fisherface
from .imgproc import GrayImage
from .jsonio import FixedFloat


@dataclass(frozen=True)
class TrialConfig:
    seed: int
    fraction: float = 0.8
    subset: tuple | None = None  # EmotionLabel values, >= 2 when present
    trials: int = 10

    def __post_init__(self):
        if self.trials < 1:
            raise FisherlensError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 < self.fraction < 1.0:
            raise FisherlensError(
                f"fraction must lie strictly between 0 and 1, got {self.fraction}"
            )
        if self.subset is not None:
            labels = tuple(sorted(set(self.subset)))
            if len(labels) < 2:
                raise FisherlensError(
                    f"subset must name at least 2 classes, got {len(labels)}"
                )
            object.__setattr__(self, "subset", labels)


@dataclass
class ConfusionMatrix:
    """Counts[i, j] = records of true class i predicted as class j."""

    classes: list  # ordered EmotionLabel list
    counts: np.ndarray  # c x c int64

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.classes)
        if self.counts.shape != (c, c):
            raise FisherlensError(
                f"counts shape {self.counts.shape} does not match {c} classes"
            )
        if (self.counts < 0).any():
            raise FisherlensError("confusion counts must be non-negative")

    @classmethod
    def zeros(cls, classes) -> "ConfusionMatrix":
        c = len(classes)
        return cls(list(classes), np.zeros((c, c), dtype=np.int64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.classes == other.classes and np.array_equal(self.counts, other.counts)

    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        total = self.total()
        if total == 0:
            raise FisherlensError("empty confusion matrix has no accuracy")
        return float(np.trace(self.counts)) / total

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise FisherlensError("cannot pool confusion matrices over different classes")
        return ConfusionMatrix(list(self.classes), self.counts + other.counts)

    def recall(self, label) -> float:
        i = self.classes.index(label)
        row = int(self.counts[i].sum())
        return float(self.counts[i, i]) / row if row else 0.0

    def precision(self, label) -> float:
        j = self.classes.index(label)
        col = int(self.counts[:, j].sum())
        return float(self.counts[j, j]) / col if col else 0.0


@dataclass
class TrialReport:
    config: TrialConfig
    accuracies: list
    mean: float
    std: float
    pooled: ConfusionMatrix


def load_face(cache: dict, path, face_w: int, face_h: int) -> GrayImage:
    face = cache.get(path)
    if face is None:
        img = netpbm.read_image(path)
        if not isinstance(img, GrayImage):
            raise FisherlensError(f"{path} is a color image; prepared faces are grayscale")
        cache[path] = face = img
    if (face.width, face.height) != (face_w, face_h):
        raise FisherlensError(
            f"{path} is {face.width}x{face.height}, manifest says {face_w}x{face_h}"
        )
    return face


def run_trial(
    manifest: DatasetManifest,
    cfg: TrialConfig,
    trial_index: int,
    cache: dict | None = None,
):
    """One seeded split/train/test round -> (accuracy, ConfusionMatrix)."""
    if cache is None:
        cache = {}
    work = manifest.filtered(cfg.subset) if cfg.subset is not None else manifest
    classes = work.classes()
    if len(classes) < 2:
        raise FisherlensError(
            f"evaluation needs at least 2 classes present, got {len(classes)}"
        )
    rng = Rng(cfg.seed ^ trial_index)
    train_m, test_m = split(work, cfg.fraction, rng)

    faces = [
        load_face(cache, r.image_path, work.face_w, work.face_h) for r in train_m.records
    ]
    x = SampleMatrix.from_faces(faces, [r.label for r in train_m.records])
    model = train_fisherface(x)

    cm = ConfusionMatrix.zeros(classes)
    index = {label: i for i, label in enumerate(classes)}
    for rec in test_m.records:
        face = load_face(cache, rec.image_path, work.face_w, work.face_h)
        guess = predict(model, face).label
        cm.counts[index[rec.label], index[guess]] += 1
    return cm.accuracy(), cm


def run_repeated(manifest: DatasetManifest, cfg: TrialConfig) -> TrialReport:
    """Trials 0..cfg.trials-1; pooled matrix is the elementwise sum."""
    cache: dict = {}
    accuracies = []
    pooled = None
    for t in range(cfg.trials):
        acc, cm = run_trial(manifest, cfg, t, cache)
        accuracies.append(acc)
        pooled = cm if pooled is None else pooled.add(cm)
    n = len(accuracies)
    mean = sum(accuracies) / n
    if n > 1:
        var = sum((a - mean) ** 2 for a in accuracies) / (n - 1)
        std = var ** 0.5
    else:
        std = 0.0
    return TrialReport(config=cfg, accuracies=accuracies, mean=mean, std=std, pooled=pooled)


def top_confusions(cm: ConfusionMatrix, k: int) -> list:
    """The k largest nonzero off-diagonal cells as (true, predicted, count)."""
    if k < 1:
        raise FisherlensError(f"k must be >= 1, got {k}")
    cells = []
    c = len(cm.classes)
    for i in range(c):
        for j in range(c):
            if i != j and cm.counts[i, j] > 0:
                cells.append((cm.classes[i], cm.classes[j], int(cm.counts[i, j])))
    cells.sort(key=lambda cell: (-cell[2], cm.classes.index(cell[0]), cm.classes.index(cell[1])))
    return cells[:k]


# ---------------------------------------------------------------------------
# rendering


def _fmt(x: float) -> str:
    return f"{float(FixedFloat(x)):.4f}"


def report_document(report: TrialReport) -> dict:
    """Machine form of the report; every statistic quoted to 4 decimals."""
    cfg = report.config
    cm = report.pooled
    return {
        "config": {
            "seed": cfg.seed,
            "fraction": FixedFloat(cfg.fraction),
            "subset": None if cfg.subset is None else [c.name for c in cfg.subset],
            "trials": cfg.trials,
        },
        "classes": [c.name for c in cm.classes],
        "per_trial": [FixedFloat(a) for a in report.accuracies],
        "mean": FixedFloat(report.mean),
        "std": FixedFloat(report.std),
        "pooled": [[int(v) for v in row] for row in cm.counts],
        "pooled_accuracy": FixedFloat(cm.accuracy()),
        "per_class": [
            {
                "label": c.name,
                "precision": FixedFloat(cm.precision(c)),
                "recall": FixedFloat(cm.recall(c)),
            }
            for c in cm.classes
        ],
        "top_confusions": [
            {"true": t.name, "predicted": p.name, "count": n}
            for t, p, n in top_confusions(cm, k=max(1, len(cm.classes) ** 2))
        ],
    }


def render_report(report: TrialReport):
    """(text, document) with identical numbers; text is the human table."""
    cfg = report.config
    cm = report.pooled
    doc = report_document(report)

    width = max(len(c.name) for c in cm.classes)
    lines = []
    subset = "all" if cfg.subset is None else ",".join(c.name for c in cfg.subset)
    lines.append(
        f"trials: {cfg.trials}  fraction: {_fmt(cfg.fraction)}  seed: {cfg.seed}  subset: {subset}"
    )
    lines.append(f"accuracy: mean {_fmt(report.mean)}  std {_fmt(report.std)}")
    lines.append("per-trial: " + " ".join(_fmt(a) for a in report.accuracies))
    lines.append("")
    lines.append(f"pooled confusion (rows true, cols predicted), accuracy {_fmt(cm.accuracy())}:")
    header = " " * (width + 2) + "  ".join(f"{c.name:>{width}}" for c in cm.classes)
    lines.append(header)
    for i, c in enumerate(cm.classes):
        row = "  ".join(f"{int(v):>{width}}" for v in cm.counts[i])
        lines.append(f"{c.name:<{width}}  {row}")
    lines.append("")
    lines.append(f"{'class':<{width}}  precision  recall")
    for c in cm.classes:
        lines.append(f"{c.name:<{width}}  {_fmt(cm.precision(c)):>9}  {_fmt(cm.recall(c)):>6}")
    lines.append("")
    confusions = top_confusions(cm, k=max(1, len(cm.classes) ** 2))
    if confusions:
        lines.append("top confusions (true -> predicted: count):")
        for t, p, n in confusions:
            lines.append(f"  {t.name} -> {p.name}: {n}")
    else:
        lines.append("top confusions: none")
    return "\n".join(lines) + "\n", doc


# ---------------------------------------------------------------------------
# delimited outputs


def write_trials_csv(report: TrialReport, path):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "accuracy"])
        for t, acc in enumerate(report.accuracies):
            writer.writerow([t, _fmt(acc)])


def write_confusion_csv(cm: ConfusionMatrix, path):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["true\\predicted"] + [c.name for c in cm.classes])
        for i, c in enumerate(cm.classes):
            writer.writerow([c.name] + [int(v) for v in cm.counts[i]])
