"""Stump-based Haar cascade parsing and multi-scale face detection.

Supports the legacy cascade XML layout: a storage root holding one cascade
element with a two-integer ``size``, then ``stages`` of single-node trees,
each node carrying a 2-3 rectangle feature, a threshold and two leaf values.
Tree-structured classifiers and tilted features are rejected loudly; the
frontal-face cascades this pipeline needs are plain stumps.

Window evaluation is variance-normalized: with window sum S, squared sum SQ
and area A, the deviation is sigma = sqrt(SQ/A - (S/A)^2) (floored at 1 for
flat windows), a stump votes left when its area-normalized feature sum falls
below threshold * sigma, and a window passes a stage when the sum of votes
reaches the stage threshold. Detection runs this over a scale pyramid and
merges raw hits by rectangle similarity.
"""

from __future__ import annotations

import math
import os
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CascadeFormatError, FisherlensError, UnsupportedCascadeError
from .imgproc import GrayImage, IntegralImage, Rect

LEGACY_TYPE_ID = "opencv-haar-classifier"

# file names probed, in order, when loading a cascade directory
PREFERRED_CASCADE_FILES = (
    "haarcascade_frontalface_default.xml",
    "haarcascade_frontalface_alt.xml",
    "haarcascade_frontalface_alt2.xml",
    "haarcascade_frontalface_alt_tree.xml",
)


@dataclass(frozen=True)
class HaarFeature:
    rects: tuple  # ((Rect, weight), ...) in base-window coordinates
    tilted: bool = False


@dataclass(frozen=True)
class WeakClassifier:
    feature: HaarFeature
    threshold: float
    left_val: float
    right_val: float


@dataclass(frozen=True)
class Stage:
    classifiers: tuple
    stage_threshold: float


@dataclass(frozen=True)
class CascadeModel:
    name: str
    window_w: int
    window_h: int
    stages: tuple

    def num_classifiers(self) -> int:
        return sum(len(s.classifiers) for s in self.stages)


@dataclass(frozen=True)
class Detection:
    rect: Rect
    neighbors: int


# ---------------------------------------------------------------------------
# parsing


def _text(elem, tag: str, where: str) -> str:
    child = elem.find(tag)
    if child is None or child.text is None:
        raise CascadeFormatError(f"missing <{tag}> element in {where}")
    return child.text.strip()


def _parse_feature(node, window_w: int, window_h: int, where: str) -> HaarFeature:
    feat = node.find("feature")
    if feat is None:
        raise CascadeFormatError(f"missing <feature> in {where}")
    rects_el = feat.find("rects")
    if rects_el is None:
        raise CascadeFormatError(f"missing <rects> in {where}")
    rects = []
    for rel in rects_el:
        parts = (rel.text or "").split()
        if len(parts) != 5:
            raise CascadeFormatError(f"rect entry must be 'x y w h weight' in {where}: {rel.text!r}")
        try:
            x, y, w, h = (int(p) for p in parts[:4])
            weight = float(parts[4])
        except ValueError:
            raise CascadeFormatError(f"bad rect numbers in {where}: {rel.text!r}") from None
        if x < 0 or y < 0 or x + w > window_w or y + h > window_h:
            raise CascadeFormatError(
                f"feature rect ({x},{y},{w},{h}) exceeds {window_w}x{window_h} window in {where}"
            )
        rects.append((Rect(x, y, w, h), weight))
    if not 2 <= len(rects) <= 3:
        raise CascadeFormatError(f"feature must have 2-3 rects, got {len(rects)} in {where}")
    weights = [w for _, w in rects]
    if not (any(w < 0 for w in weights) and any(w > 0 for w in weights)):
        raise CascadeFormatError(f"feature weights need mixed signs in {where}: {weights}")
    tilted_el = feat.find("tilted")
    tilted = tilted_el is not None and tilted_el.text is not None and int(tilted_el.text.strip()) != 0
    if tilted:
        raise UnsupportedCascadeError(f"tilted (45-degree) feature in {where} is not supported")
    return HaarFeature(rects=tuple(rects), tilted=tilted)


def parse_cascade(doc: str, name: str = "<cascade>") -> CascadeModel:
    """Parse a legacy stump cascade XML document.

    Raises CascadeFormatError on malformed XML or schema violations and
    UnsupportedCascadeError for tree classifiers or tilted features.
    """
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        line, col = exc.position
        raise CascadeFormatError(f"{name}: malformed XML at line {line}, column {col}: {exc.msg if hasattr(exc, 'msg') else exc}") from exc

    cascades = list(root)
    if not cascades:
        raise CascadeFormatError(f"{name}: storage element holds no cascade")
    casc = cascades[0]
    type_id = casc.get("type_id")
    if type_id is not None and type_id != LEGACY_TYPE_ID:
        raise UnsupportedCascadeError(
            f"{name}: cascade type {type_id!r} is not the legacy stump format"
        )

    size_el = casc.find("size")
    if size_el is None or size_el.text is None:
        raise CascadeFormatError(f"{name}: missing <size> element")
    parts = size_el.text.split()
    if len(parts) != 2:
        raise CascadeFormatError(f"{name}: <size> must hold two integers, got {size_el.text!r}")
    window_w, window_h = int(parts[0]), int(parts[1])
    if window_w < 4 or window_h < 4:
        raise CascadeFormatError(f"{name}: base window {window_w}x{window_h} is too small")

    stages_el = casc.find("stages")
    if stages_el is None or len(stages_el) == 0:
        raise CascadeFormatError(f"{name}: cascade has no stages")

    stages = []
    for si, stage_el in enumerate(stages_el):
        where = f"{name} stage {si}"
        trees_el = stage_el.find("trees")
        if trees_el is None or len(trees_el) == 0:
            raise CascadeFormatError(f"missing or empty <trees> in {where}")
        classifiers = []
        for ti, tree_el in enumerate(trees_el):
            nodes = list(tree_el)
            if len(nodes) != 1:
                raise UnsupportedCascadeError(
                    f"tree-structured weak classifier ({len(nodes)} nodes) in {where}, tree {ti};"
                    " only stumps are supported"
                )
            node = nodes[0]
            if node.find("left_node") is not None or node.find("right_node") is not None:
                raise UnsupportedCascadeError(
                    f"weak classifier with child-node links in {where}, tree {ti};"
                    " only stumps are supported"
                )
            nwhere = f"{where}, tree {ti}"
            feature = _parse_feature(node, window_w, window_h, nwhere)
            classifiers.append(
                WeakClassifier(
                    feature=feature,
                    threshold=float(_text(node, "threshold", nwhere)),
                    left_val=float(_text(node, "left_val", nwhere)),
                    right_val=float(_text(node, "right_val", nwhere)),
                )
            )
        stages.append(
            Stage(
                classifiers=tuple(classifiers),
                stage_threshold=float(_text(stage_el, "stage_threshold", where)),
            )
        )
    return CascadeModel(name=casc.tag, window_w=window_w, window_h=window_h, stages=tuple(stages))


def load_cascade_file(path) -> CascadeModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_cascade(fh.read(), name=os.path.basename(os.fspath(path)))


def packaged_cascade_dir() -> str:
    """Directory with the cascade files shipped inside this package."""
    return os.path.join(os.path.dirname(__file__), "data", "cascades")


def load_cascade_sequence(directory) -> list:
    """Load every cascade XML in ``directory``, well-known face files first.

    The order defines the detection sequence: known frontal-face files in
    their conventional order, then any remaining *.xml sorted by name.
    """
    names = sorted(os.listdir(directory))
    xml_names = [n for n in names if n.lower().endswith(".xml")]
    ordered = [n for n in PREFERRED_CASCADE_FILES if n in xml_names]
    ordered += [n for n in xml_names if n not in ordered]
    if not ordered:
        raise FisherlensError(f"no cascade XML files in {os.fspath(directory)!r}")
    return [load_cascade_file(os.path.join(directory, n)) for n in ordered]


# ---------------------------------------------------------------------------
# evaluation


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def _scale_rect(r: Rect, scale: float, ww: int, wh: int):
    """Scale a base-window rect, rounding each coordinate independently.

    Clamped so the result stays inside the ww x wh window; the clamp keeps
    integral lookups in bounds when rounding pushes an edge one pixel out.
    """
    x = min(_round_half_up(r.x * scale), ww - 1)
    y = min(_round_half_up(r.y * scale), wh - 1)
    w = max(1, _round_half_up(r.w * scale))
    h = max(1, _round_half_up(r.h * scale))
    w = min(w, ww - x)
    h = min(h, wh - y)
    return x, y, w, h


class _ScaledStage:
    """Stage compiled to flat numpy arrays for one pyramid scale."""

    __slots__ = ("rx", "ry", "rw", "rh", "wt", "thr", "left", "right", "threshold")

    def __init__(self, stage: Stage, scale: float, ww: int, wh: int, area: float):
        m = len(stage.classifiers)
        self.rx = np.zeros((m, 3), dtype=np.intp)
        self.ry = np.zeros((m, 3), dtype=np.intp)
        self.rw = np.ones((m, 3), dtype=np.intp)
        self.rh = np.ones((m, 3), dtype=np.intp)
        self.wt = np.zeros((m, 3), dtype=np.float64)
        self.thr = np.empty(m, dtype=np.float64)
        self.left = np.empty(m, dtype=np.float64)
        self.right = np.empty(m, dtype=np.float64)
        self.threshold = stage.stage_threshold
        for j, wc in enumerate(stage.classifiers):
            self.thr[j] = wc.threshold
            self.left[j] = wc.left_val
            self.right[j] = wc.right_val
            for k, (rect, weight) in enumerate(wc.feature.rects):
                x, y, w, h = _scale_rect(rect, scale, ww, wh)
                self.rx[j, k] = x
                self.ry[j, k] = y
                self.rw[j, k] = w
                self.rh[j, k] = h
                self.wt[j, k] = weight / area


def _window_stats(ii: IntegralImage, xs, ys, ww: int, wh: int):
    """Mean and deviation arrays for windows anchored at (xs, ys)."""
    T, Q = ii.sums, ii.squared_sums
    area = float(ww * wh)
    s = T[ys + wh, xs + ww] - T[ys, xs + ww] - T[ys + wh, xs] + T[ys, xs]
    sq = Q[ys + wh, xs + ww] - Q[ys, xs + ww] - Q[ys + wh, xs] + Q[ys, xs]
    mean = s / area
    var = sq / area - mean * mean
    sigma = np.where(var > 0, np.sqrt(np.maximum(var, 0)), 1.0)
    return mean, sigma


def scan_windows(model: CascadeModel, ii: IntegralImage, scale: float, step: int) -> list:
    """All windows at one scale that pass every stage, as rects.

    Positions are scanned row-major with the given step; the result order is
    deterministic.
    """
    ww = _round_half_up(model.window_w * scale)
    wh = _round_half_up(model.window_h * scale)
    if ww > ii.width or wh > ii.height:
        return []
    area = float(ww * wh)
    stages = [_ScaledStage(st, scale, ww, wh, area) for st in model.stages]

    xs1 = np.arange(0, ii.width - ww + 1, step, dtype=np.intp)
    ys1 = np.arange(0, ii.height - wh + 1, step, dtype=np.intp)
    ys, xs = (a.reshape(-1) for a in np.meshgrid(ys1, xs1, indexing="ij"))
    _, sigma = _window_stats(ii, xs, ys, ww, wh)

    T = ii.sums
    for st in stages:
        if xs.size == 0:
            break
        total = np.zeros(xs.size, dtype=np.float64)
        for j in range(st.thr.size):
            f = np.zeros(xs.size, dtype=np.float64)
            for k in range(3):
                w = st.wt[j, k]
                if w == 0.0:
                    continue
                x0 = xs + st.rx[j, k]
                y0 = ys + st.ry[j, k]
                x1 = x0 + st.rw[j, k]
                y1 = y0 + st.rh[j, k]
                f += w * (T[y1, x1] - T[y0, x1] - T[y1, x0] + T[y0, x0])
            total += np.where(f < st.thr[j] * sigma, st.left[j], st.right[j])
        keep = total >= st.threshold
        xs, ys, sigma = xs[keep], ys[keep], sigma[keep]

    return [Rect(int(x), int(y), ww, wh) for x, y in zip(xs, ys)]


def eval_window(model: CascadeModel, ii: IntegralImage, window: Rect, scale: float) -> bool:
    """Evaluate one window against every stage; True when all stages pass.

    The window must have the base window's dimensions scaled by ``scale``
    (each rounded half up) and lie inside the image.
    """
    if scale < 1:
        raise FisherlensError(f"scale must be >= 1, got {scale}")
    ww = _round_half_up(model.window_w * scale)
    wh = _round_half_up(model.window_h * scale)
    if (window.w, window.h) != (ww, wh):
        raise FisherlensError(
            f"window {window.w}x{window.h} does not match base window at scale {scale} ({ww}x{wh})"
        )
    area = float(window.w * window.h)
    mean = ii.rect_sum(window) / area
    var = ii.rect_sum_sq(window) / area - mean * mean
    sigma = math.sqrt(var) if var > 0 else 1.0

    for stage in model.stages:
        total = 0.0
        for wc in stage.classifiers:
            f = 0.0
            for rect, weight in wc.feature.rects:
                x, y, w, h = _scale_rect(rect, scale, ww, wh)
                f += weight * ii.rect_sum(Rect(window.x + x, window.y + y, w, h))
            f /= area
            total += wc.left_val if f < wc.threshold * sigma else wc.right_val
        if total < stage.stage_threshold:
            return False
    return True


# ---------------------------------------------------------------------------
# grouping and multi-scale driver


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def group_rects(raw: list, min_neighbors: int, eps: float = 0.2) -> list:
    """Cluster similar rects (transitively) and average each big-enough cluster.

    Two rects are similar when their x and y offsets are within
    eps * min(w1, w2) and their widths/heights differ by at most eps times
    the smaller one. Clusters smaller than max(1, min_neighbors) are dropped.
    """
    if eps < 0:
        raise FisherlensError(f"eps must be >= 0, got {eps}")
    if not raw:
        return []
    x = np.array([r.x for r in raw], dtype=np.float64)
    y = np.array([r.y for r in raw], dtype=np.float64)
    w = np.array([r.w for r in raw], dtype=np.float64)
    h = np.array([r.h for r in raw], dtype=np.float64)

    min_w = np.minimum.outer(w, w)
    min_h = np.minimum.outer(h, h)
    tol = eps * min_w
    sim = (
        (np.abs(np.subtract.outer(x, x)) <= tol)
        & (np.abs(np.subtract.outer(y, y)) <= tol)
        & (np.abs(np.subtract.outer(w, w)) <= eps * min_w)
        & (np.abs(np.subtract.outer(h, h)) <= eps * min_h)
    )

    uf = _UnionFind(len(raw))
    for i, j in zip(*np.nonzero(np.triu(sim, k=1))):
        uf.union(int(i), int(j))

    clusters: dict = {}
    for i in range(len(raw)):
        clusters.setdefault(uf.find(i), []).append(i)

    need = max(1, min_neighbors)
    out = []
    for members in clusters.values():
        if len(members) < need:
            continue
        idx = np.asarray(members)
        rect = Rect(
            _round_half_up(float(x[idx].mean())),
            _round_half_up(float(y[idx].mean())),
            max(1, _round_half_up(float(w[idx].mean()))),
            max(1, _round_half_up(float(h[idx].mean()))),
        )
        out.append(Detection(rect=rect, neighbors=len(members)))
    out.sort(key=lambda d: (-d.rect.area, d.rect.y, d.rect.x))
    return out


def detect_multiscale(
    model: CascadeModel,
    img: GrayImage,
    scale_factor: float = 1.1,
    min_neighbors: int = 3,
    min_size: int = 24,
    threads: int = 1,
) -> list:
    """Sliding-window detection over a geometric scale pyramid.

    Scales start at 1 and grow by ``scale_factor`` while the scaled window
    fits the image; scales whose window falls below ``min_size`` are skipped.
    The window step at scale s is max(1, round(s)). Raw hits are grouped with
    ``group_rects``; the result is sorted by descending area then ascending
    (y, x) and is identical whatever ``threads`` is.
    """
    if scale_factor <= 1:
        raise FisherlensError(f"scale_factor must be > 1, got {scale_factor}")
    ii = IntegralImage(img)

    scales = []
    s = 1.0
    while True:
        ww = _round_half_up(model.window_w * s)
        wh = _round_half_up(model.window_h * s)
        if ww > img.width or wh > img.height:
            break
        if min(ww, wh) >= min_size:
            scales.append(s)
        s *= scale_factor

    def scan(sc: float) -> list:
        return scan_windows(model, ii, sc, step=max(1, _round_half_up(sc)))

    raw: list = []
    if threads > 1 and len(scales) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rects in pool.map(scan, scales):
                raw.extend(rects)
    else:
        for sc in scales:
            raw.extend(scan(sc))

    raw.sort(key=lambda r: (r.w, r.h, r.x, r.y))
    return group_rects(raw, min_neighbors)


def detect_face_sequence(models: list, img: GrayImage, **kwargs):
    """Run cascades in order; first one to find anything wins.

    Returns the largest detection's rect (ties to the smallest (y, x)), or
    None when every cascade comes up empty.
    """
    if not models:
        raise FisherlensError("detect_face_sequence needs at least one cascade")
    for model in models:
        dets = detect_multiscale(model, img, **kwargs)
        if dets:
            return dets[0].rect
    return None
