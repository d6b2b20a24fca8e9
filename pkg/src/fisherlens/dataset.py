"""Dataset machinery: emotion labels, shell-style name matching, a portable
seeded PRNG, CK/CK+-style ingestion, stratified splitting and face
preparation.

The PRNG is SplitMix64 (one 64-bit word of state), so identical seeds give
identical streams in any language. randint uses plain modulo reduction; the
bias is negligible for the tiny ranges used here and is accepted for the sake
of portability.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from dataclasses import dataclass, field

from . import jsonio, netpbm
from .cascade import CascadeModel, detect_face_sequence
from .errors import EmptyResultError, FisherlensError, IngestError, SplitError
from .imgproc import GrayImage, RgbImage, crop, gray_average, gray_luminosity, resize_bilinear

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
DEFAULT_SEED = 42
SEED_ENV_VAR = "FISHERLENS_SEED"

IMAGE_EXTENSIONS = (".pgm", ".ppm")


class EmotionLabel(enum.IntEnum):
    """The eight recognizable emotion classes, in their canonical order."""

    neutral = 0
    happy = 1
    anger = 2
    disgust = 3
    surprise = 4
    fear = 5
    sad = 6
    contempt = 7


def parse_label(text: str) -> EmotionLabel:
    """Accept either a lowercase emotion name or its numeric code."""
    t = text.strip().lower()
    try:
        return EmotionLabel[t]
    except KeyError:
        pass
    try:
        return EmotionLabel(int(t))
    except (ValueError, KeyError):
        raise FisherlensError(f"unknown emotion label {text!r}") from None


# CK/CK+ emotion label files use their own coding; neutral comes from each
# session's first frame rather than a code.
CK_CODE_TO_LABEL = {
    1: EmotionLabel.anger,
    2: EmotionLabel.contempt,
    3: EmotionLabel.disgust,
    4: EmotionLabel.fear,
    5: EmotionLabel.happy,
    6: EmotionLabel.sad,
    7: EmotionLabel.surprise,
}


# ---------------------------------------------------------------------------
# glob-style matching, single-directory scope


def glob_match(pattern: str, name: str) -> bool:
    """Whole-name wildcard match: ``*`` any run of characters, ``?`` exactly one.

    Patterns and names never contain path separators; matching cannot cross
    into subdirectories.
    """
    for s in (pattern, name):
        if "/" in s or os.sep in s:
            raise FisherlensError(f"path separators are not allowed here: {s!r}")
    # iterative matcher with backtracking to the most recent star
    pi = ni = 0
    star = -1
    star_ni = 0
    np_, nn = len(pattern), len(name)
    while ni < nn:
        if pi < np_ and (pattern[pi] == "?" or pattern[pi] == name[ni]):
            pi += 1
            ni += 1
        elif pi < np_ and pattern[pi] == "*":
            star = pi
            star_ni = ni
            pi += 1
        elif star >= 0:
            star_ni += 1
            pi = star + 1
            ni = star_ni
        else:
            return False
    while pi < np_ and pattern[pi] == "*":
        pi += 1
    return pi == np_


def list_matching(directory, pattern: str) -> list:
    """Full paths of entries in ``directory`` whose names match ``pattern``.

    Lexicographically sorted; contents of subdirectories are never searched.
    """
    names = sorted(os.listdir(directory))
    return [os.path.join(directory, n) for n in names if glob_match(pattern, n)]


# ---------------------------------------------------------------------------
# deterministic PRNG

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Rng:
    """SplitMix64 stream. Single owner; pass explicitly, never share mutably."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def gauss(self) -> float:
        """Standard normal deviate (Box-Muller, one value per call pair)."""
        u1 = self.next_float()
        while u1 <= 0.0:
            u1 = self.next_float()
        u2 = self.next_float()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def randint(rng: Rng, m: int, n: int) -> int:
    """Uniform integer x with m <= x <= n; both endpoints reachable."""
    if m > n:
        raise FisherlensError(f"randint requires m <= n, got {m} > {n}")
    return m + rng.next_u64() % (n - m + 1)


def choice(rng: Rng, items):
    """A uniformly chosen element of a non-empty sequence."""
    if len(items) == 0:
        raise FisherlensError("choice requires a non-empty sequence")
    return items[randint(rng, 0, len(items) - 1)]


def shuffle(rng: Rng, items: list):
    """In-place Fisher-Yates shuffle driven by ``rng``."""
    for i in range(len(items) - 1, 0, -1):
        j = randint(rng, 0, i)
        items[i], items[j] = items[j], items[i]


def seed_from_env(explicit=None) -> int:
    """Explicit seed if given, else FISHERLENS_SEED, else the default 42."""
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise FisherlensError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    label: EmotionLabel
    subject: str
    session: str

    def sort_key(self):
        return (self.subject, self.session, self.image_path)


@dataclass
class DatasetManifest:
    """Ordered set of records plus the face normalization size.

    Records are always kept in canonical (subject, session, path) order;
    split results are only reproducible because of this.
    """

    face_w: int
    face_h: int
    records: list = field(default_factory=list)

    def __post_init__(self):
        if self.face_w < 1 or self.face_h < 1:
            raise FisherlensError(f"face size must be positive, got {self.face_w}x{self.face_h}")
        self.records = sorted(self.records, key=SampleRecord.sort_key)

    def __len__(self) -> int:
        return len(self.records)

    def classes(self) -> list:
        return sorted({r.label for r in self.records})

    def by_class(self) -> dict:
        out: dict = {c: [] for c in self.classes()}
        for r in self.records:
            out[r.label].append(r)
        return out

    def filtered(self, subset) -> "DatasetManifest":
        keep = set(subset)
        return DatasetManifest(
            self.face_w, self.face_h, [r for r in self.records if r.label in keep]
        )

    def to_document(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "face_w": self.face_w,
            "face_h": self.face_h,
            "records": [
                {
                    "image_path": r.image_path,
                    "label": r.label.name,
                    "subject": r.subject,
                    "session": r.session,
                }
                for r in self.records
            ],
        }

    def save(self, path):
        jsonio.dump_path(self.to_document(), path)

    @classmethod
    def from_document(cls, doc: dict) -> "DatasetManifest":
        try:
            if doc["version"] != MANIFEST_VERSION:
                raise FisherlensError(f"unsupported manifest version {doc['version']!r}")
            records = [
                SampleRecord(
                    image_path=r["image_path"],
                    label=parse_label(r["label"]),
                    subject=r["subject"],
                    session=r["session"],
                )
                for r in doc["records"]
            ]
            return cls(int(doc["face_w"]), int(doc["face_h"]), records)
        except (KeyError, TypeError) as exc:
            raise FisherlensError(f"malformed manifest document: {exc}") from exc

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_document(jsonio.load_path(path))


# ---------------------------------------------------------------------------
# CK/CK+-style ingestion


def _read_ck_label(path) -> EmotionLabel:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    try:
        code = int(float(text))  # files often hold "3.0000000e+00"
    except ValueError:
        raise IngestError(f"cannot parse emotion code in {path}: {text!r}") from None
    if code not in CK_CODE_TO_LABEL:
        raise IngestError(f"emotion code {code} in {path} outside 1..7")
    return CK_CODE_TO_LABEL[code]


def _subdirs(root):
    return sorted(e.name for e in os.scandir(root) if e.is_dir())


def ingest_ck(images_root, labels_root, face_w: int = 48, face_h: int = 48) -> DatasetManifest:
    """Build a manifest from a subject/session tree with per-session labels.

    For every session that has a label file, the last frame becomes a record
    with the mapped emotion and the first frame a neutral record. Sessions
    without a label file contribute nothing.
    """
    records = []
    for subject in _subdirs(images_root):
        label_subject_dir = os.path.join(labels_root, subject)
        if not os.path.isdir(label_subject_dir):
            continue
        for session in _subdirs(os.path.join(images_root, subject)):
            label_dir = os.path.join(label_subject_dir, session)
            if not os.path.isdir(label_dir):
                continue
            label_files = sorted(
                n for n in os.listdir(label_dir) if n.lower().endswith(".txt")
            )
            if not label_files:
                continue
            label = _read_ck_label(os.path.join(label_dir, label_files[0]))
            session_dir = os.path.join(images_root, subject, session)
            frames = sorted(
                n for n in os.listdir(session_dir) if n.lower().endswith(IMAGE_EXTENSIONS)
            )
            if not frames:
                log.warning("labeled session %s/%s has no frames, skipping", subject, session)
                continue
            records.append(
                SampleRecord(os.path.join(session_dir, frames[-1]), label, subject, session)
            )
            records.append(
                SampleRecord(
                    os.path.join(session_dir, frames[0]), EmotionLabel.neutral, subject, session
                )
            )
    if not records:
        raise EmptyResultError(
            f"no labeled sessions found under {images_root!r} / {labels_root!r}"
        )
    return DatasetManifest(face_w, face_h, records)


# ---------------------------------------------------------------------------
# stratified split


def split(manifest: DatasetManifest, fraction: float = 0.8, rng: Rng | None = None):
    """Seeded stratified split into (train, test) manifests.

    Each class is shuffled independently; the first ceil(fraction * count)
    records go to train, backing off by one where needed so every class keeps
    at least one test record.
    """
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    if rng is None:
        rng = Rng(DEFAULT_SEED)
    train: list = []
    test: list = []
    for label, recs in manifest.by_class().items():
        if len(recs) < 2:
            raise SplitError(f"class {label.name!r} has {len(recs)} record(s), need >= 2")
        recs = list(recs)
        shuffle(rng, recs)
        n_train = math.ceil(fraction * len(recs))
        if n_train >= len(recs):
            n_train = len(recs) - 1
        train.extend(recs[:n_train])
        test.extend(recs[n_train:])
    mk = lambda rs: DatasetManifest(manifest.face_w, manifest.face_h, rs)
    return mk(train), mk(test)


# ---------------------------------------------------------------------------
# face preparation


@dataclass
class PrepareReport:
    manifest: DatasetManifest
    skipped: list  # records with no detectable face
    errors: list  # (record, message) pairs for I/O failures


def load_gray(path, gray_method: str = "luminosity") -> GrayImage:
    """Read an image file; color inputs are converted with the chosen formula."""
    img = netpbm.read_image(path)
    if isinstance(img, RgbImage):
        if gray_method == "luminosity":
            return gray_luminosity(img)
        if gray_method == "average":
            return gray_average(img)
        raise FisherlensError(f"unknown gray method {gray_method!r}")
    return img


def prepare_faces(
    manifest: DatasetManifest,
    cascades: list,
    out_root,
    gray_method: str = "luminosity",
) -> PrepareReport:
    """Detect, crop, resize and save one face per record.

    Output files land under out_root/<emotion>/<subject>_<session>.pgm at the
    manifest's face size. Records where no cascade finds a face are dropped
    and reported. Deterministic: running twice writes identical bytes.
    """
    if not cascades:
        raise FisherlensError("prepare_faces needs at least one cascade")
    prepared = []
    skipped = []
    errors = []
    for rec in manifest.records:
        try:
            gray = load_gray(rec.image_path, gray_method)
            face_rect = detect_face_sequence(cascades, gray)
            if face_rect is None:
                log.info("no face found in %s, dropping", rec.image_path)
                skipped.append(rec)
                continue
            face = resize_bilinear(crop(gray, face_rect), manifest.face_w, manifest.face_h)
            out_dir = os.path.join(out_root, rec.label.name)
            os.makedirs(out_dir, exist_ok=True)
            out_path = os.path.join(out_dir, f"{rec.subject}_{rec.session}.pgm")
            netpbm.write_image(face, out_path)
            prepared.append(
                SampleRecord(out_path, rec.label, rec.subject, rec.session)
            )
        except OSError as exc:
            errors.append((rec, str(exc)))
    if not prepared:
        raise EmptyResultError("no faces were detected in any record")
    out = DatasetManifest(manifest.face_w, manifest.face_h, prepared)
    return PrepareReport(manifest=out, skipped=skipped, errors=errors)
