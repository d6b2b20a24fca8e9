"""Fisherface subspace learning: PCA for compression, LDA for discrimination.

The eigensolver is an in-repo cyclic Jacobi iteration for symmetric matrices;
PCA uses the Gram-matrix trick (an n x n eigenproblem instead of d x d, with
eigenvectors mapped back through the centered data), and LDA reduces the
generalized problem S_b v = lambda S_w v to a standard symmetric one by
Cholesky-factoring a slightly ridged S_w. Classification is 1-nearest-neighbor
over the projected training samples.

All eigenvectors are sign-canonicalized (first non-negligible component made
positive) so that retraining on identical data reproduces the model bit for
bit on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .dataset import EmotionLabel, parse_label
from .errors import FisherlensError, ModelFormatError, NumericalError, RankError
from .imgproc import GrayImage

MODEL_VERSION = 1

_JACOBI_MAX_SWEEPS = 100
_JACOBI_STOP_FACTOR = 1e-12
_SYMMETRY_TOL = 1e-10
_RIDGE_FACTOR = 1e-9


@dataclass
class SampleMatrix:
    """Training samples: n flattened faces (scaled to [0, 1]) with labels."""

    face_w: int
    face_h: int
    rows: np.ndarray  # n x d float64
    labels: list  # n EmotionLabel values

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise FisherlensError(f"rows must be 2-D, got shape {self.rows.shape}")
        n, d = self.rows.shape
        if d != self.face_w * self.face_h:
            raise FisherlensError(
                f"row length {d} does not match face size {self.face_w}x{self.face_h}"
            )
        if n < 2:
            raise FisherlensError(f"need at least 2 samples, got {n}")
        if len(self.labels) != n:
            raise FisherlensError(f"{len(self.labels)} labels for {n} rows")
        for label, count in self.class_counts().items():
            if count < 2:
                raise FisherlensError(f"class {label!r} has {count} sample(s), need >= 2")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def class_counts(self) -> dict:
        counts: dict = {}
        for label in self.labels:
            counts[label] = counts.get(label, 0) + 1
        return counts

    @classmethod
    def from_faces(cls, faces: list, labels: list) -> "SampleMatrix":
        """Stack GrayImages of identical size into a sample matrix."""
        if not faces:
            raise FisherlensError("no faces given")
        w, h = faces[0].width, faces[0].height
        rows = np.empty((len(faces), w * h), dtype=np.float64)
        for i, face in enumerate(faces):
            if (face.width, face.height) != (w, h):
                raise FisherlensError(
                    f"face {i} is {face.width}x{face.height}, expected {w}x{h}"
                )
            rows[i] = face.pixels.reshape(-1) / 255.0
        return cls(w, h, rows, list(labels))


@dataclass
class Prediction:
    label: EmotionLabel
    distance: float
    runner_up: tuple | None = None  # (label, distance) of nearest other class


@dataclass
class FisherModel:
    face_w: int
    face_h: int
    mean: np.ndarray  # d
    projection: np.ndarray  # d x f, unit-norm columns
    projected_train: np.ndarray  # n x f
    train_labels: list  # n EmotionLabel values
    class_list: list  # ordered distinct labels, f = len - 1

    @property
    def dim(self) -> int:
        return self.projection.shape[1]


# ---------------------------------------------------------------------------
# eigensolver


def _sign_canonicalize(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip each column so its first component above ``tol`` is positive."""
    v = vectors.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.nonzero(np.abs(col) > tol)[0]
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return v


def eigen_symmetric(a) -> tuple:
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Returns (eigenvalues descending, orthonormal eigenvector columns). Stops
    once every off-diagonal magnitude falls below 1e-12 times the Frobenius
    norm of the input, or fails after 100 sweeps.
    """
    A = np.asarray(a, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise FisherlensError(f"matrix must be square and non-empty, got shape {A.shape}")
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > _SYMMETRY_TOL:
        raise FisherlensError(f"matrix is not symmetric (max asymmetry {asym:.3e})")

    n = A.shape[0]
    work = (A + A.T) / 2.0
    V = np.eye(n)
    norm = float(np.linalg.norm(work, "fro"))
    stop = _JACOBI_STOP_FACTOR * norm

    def max_offdiag() -> float:
        if n == 1:
            return 0.0
        off = np.abs(work - np.diag(np.diagonal(work)))
        return float(off.max())

    converged = norm == 0.0 or max_offdiag() <= stop
    sweeps = 0
    while not converged and sweeps < _JACOBI_MAX_SWEEPS:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= stop:
                    continue
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # work <- J^T work J with the rotation in the (p, q) plane
                row_p, row_q = work[p, :].copy(), work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                col_p, col_q = work[:, p].copy(), work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                work[p, q] = work[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        sweeps += 1
        converged = max_offdiag() <= stop
    if not converged:
        raise NumericalError(
            f"Jacobi iteration failed to converge in {_JACOBI_MAX_SWEEPS} sweeps"
            f" (residual {max_offdiag():.3e}, target {stop:.3e})"
        )

    values = np.diagonal(work).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], _sign_canonicalize(V[:, order])


# ---------------------------------------------------------------------------
# PCA / LDA


def pca_fit(x: SampleMatrix, k: int) -> tuple:
    """Principal axes via the Gram trick: (mean, d x k orthonormal basis)."""
    n = x.n
    if not 1 <= k <= n - 1:
        raise FisherlensError(f"k must satisfy 1 <= k <= n-1 = {n - 1}, got {k}")
    mean = x.rows.mean(axis=0)
    centered = x.rows - mean
    gram = centered @ centered.T / n
    values, vectors = eigen_symmetric((gram + gram.T) / 2.0)
    if values[k - 1] <= 1e-12:
        rank = int(np.count_nonzero(values > 1e-12))
        raise RankError(
            f"data rank {rank} is below the requested {k} components; use a smaller k"
        )
    basis = centered.T @ vectors[:, :k]
    basis /= np.linalg.norm(basis, axis=0)
    return mean, _sign_canonicalize(basis)


def _class_order(labels) -> list:
    return sorted(set(labels))


def lda_fit(y: np.ndarray, labels) -> np.ndarray:
    """Top c-1 discriminant directions of projected samples, unit-normalized."""
    y = np.asarray(y, dtype=np.float64)
    n, k = y.shape
    classes = _class_order(labels)
    c = len(classes)
    if c < 2:
        raise FisherlensError(f"LDA needs at least 2 classes, got {c}")
    if k < c:
        raise FisherlensError(f"LDA needs dimension >= class count, got k={k} < c={c}")
    labels = list(labels)
    global_mean = y.mean(axis=0)
    s_w = np.zeros((k, k))
    s_b = np.zeros((k, k))
    for cls in classes:
        rows = y[[i for i, lb in enumerate(labels) if lb == cls]]
        if rows.shape[0] < 2:
            raise FisherlensError(f"class {cls!r} has {rows.shape[0]} sample(s), need >= 2")
        mu = rows.mean(axis=0)
        centered = rows - mu
        s_w += centered.T @ centered
        dm = (mu - global_mean).reshape(-1, 1)
        s_b += rows.shape[0] * (dm @ dm.T)

    ridge = _RIDGE_FACTOR * np.trace(s_w) / k
    s_w_reg = s_w + ridge * np.eye(k)
    try:
        chol = np.linalg.cholesky(s_w_reg)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"within-class scatter is singular even with ridge {ridge:.3e}") from exc

    # C = L^-1 S_b L^-T, symmetric; eigenvectors map back via v = L^-T u
    tmp = np.linalg.solve(chol, s_b)
    reduced = np.linalg.solve(chol, tmp.T).T
    _, vectors = eigen_symmetric((reduced + reduced.T) / 2.0)
    top = vectors[:, : c - 1]
    basis = np.linalg.solve(chol.T, top)
    basis /= np.linalg.norm(basis, axis=0)
    return _sign_canonicalize(basis)


def train_fisherface(x: SampleMatrix, k_pca: int | None = None) -> FisherModel:
    """Fit the full PCA->LDA projection and store projected training samples.

    k_pca defaults to n - c, the standard choice that keeps the within-class
    scatter invertible. Deterministic for identical inputs.
    """
    classes = _class_order(x.labels)
    c = len(classes)
    if c < 2:
        raise FisherlensError(f"training needs at least 2 classes, got {c}")
    if x.n < c + 2:
        raise FisherlensError(f"training needs n >= c + 2 samples, got n={x.n}, c={c}")
    k = x.n - c if k_pca is None else int(k_pca)
    if not c <= k <= x.n - 1:
        raise FisherlensError(f"k_pca must satisfy c <= k <= n-1, got {k}")

    mean, pca_basis = pca_fit(x, k)
    projected = (x.rows - mean) @ pca_basis
    lda_basis = lda_fit(projected, x.labels)
    w = pca_basis @ lda_basis
    w /= np.linalg.norm(w, axis=0)

    return FisherModel(
        face_w=x.face_w,
        face_h=x.face_h,
        mean=mean,
        projection=w,
        projected_train=(x.rows - mean) @ w,
        train_labels=list(x.labels),
        class_list=classes,
    )


# ---------------------------------------------------------------------------
# prediction


def project(model: FisherModel, face: GrayImage) -> np.ndarray:
    if (face.width, face.height) != (model.face_w, model.face_h):
        raise FisherlensError(
            f"face size mismatch: expected {model.face_w}x{model.face_h},"
            f" got {face.width}x{face.height}"
        )
    vec = face.pixels.reshape(-1) / 255.0
    return (vec - model.mean) @ model.projection


def predict(model: FisherModel, face: GrayImage) -> Prediction:
    """1-nearest-neighbor in Fisher space; ties go to the lowest train index."""
    y = project(model, face)
    dists = np.linalg.norm(model.projected_train - y, axis=1)
    best = int(np.argmin(dists))
    label = model.train_labels[best]

    runner_up = None
    other = np.array([lb != label for lb in model.train_labels])
    if other.any():
        od = dists[other]
        oi = int(np.argmin(od))
        other_labels = [lb for lb in model.train_labels if lb != label]
        runner_up = (other_labels[oi], float(od[oi]))
    return Prediction(label=label, distance=float(dists[best]), runner_up=runner_up)


# ---------------------------------------------------------------------------
# persistence


def model_document(model: FisherModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "face_w": model.face_w,
        "face_h": model.face_h,
        "class_list": [c.name for c in model.class_list],
        "mean": [float(v) for v in model.mean],
        "projection": [[float(v) for v in row] for row in model.projection],
        "projected_train": [[float(v) for v in row] for row in model.projected_train],
        "train_labels": [c.name for c in model.train_labels],
    }


def save_model(model: FisherModel, path):
    jsonio.dump_path(model_document(model), path)


def model_from_document(doc: dict) -> FisherModel:
    try:
        version = doc["version"]
        if version != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {version!r}")
        face_w = int(doc["face_w"])
        face_h = int(doc["face_h"])
        class_list = [parse_label(c) for c in doc["class_list"]]
        mean = np.asarray(doc["mean"], dtype=np.float64)
        projection = np.asarray(doc["projection"], dtype=np.float64)
        projected_train = np.asarray(doc["projected_train"], dtype=np.float64)
        train_labels = [parse_label(c) for c in doc["train_labels"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model document: {exc}") from exc

    d = face_w * face_h
    f = len(class_list) - 1
    if mean.shape != (d,):
        raise ModelFormatError(f"mean length {mean.shape} does not match face size {face_w}x{face_h}")
    if projection.ndim != 2 or projection.shape != (d, f):
        raise ModelFormatError(
            f"projection shape {projection.shape} inconsistent with d={d}, f=c-1={f}"
        )
    if projected_train.ndim != 2 or projected_train.shape[1] != f:
        raise ModelFormatError(
            f"projected_train width {projected_train.shape} inconsistent with f={f}"
        )
    if len(train_labels) != projected_train.shape[0]:
        raise ModelFormatError(
            f"{len(train_labels)} labels for {projected_train.shape[0]} projected rows"
        )
    known = set(class_list)
    for lb in train_labels:
        if lb not in known:
            raise ModelFormatError(f"train label {lb.name!r} missing from class_list")
    return FisherModel(
        face_w=face_w,
        face_h=face_h,
        mean=mean,
        projection=projection,
        projected_train=projected_train,
        train_labels=train_labels,
        class_list=class_list,
    )


def load_model(path) -> FisherModel:
    try:
        doc = jsonio.load_path(path)
    except ValueError as exc:
        raise ModelFormatError(f"cannot parse model file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"model file {path} does not hold an object")
    return model_from_document(doc)
