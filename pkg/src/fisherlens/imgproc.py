"""Pixel-level primitives: grayscale conversion, crop, resize, integral images.

Images are thin immutable wrappers around uint8 numpy arrays. Both grayscale
conversions follow the classic formulas; rounding rules are frozen here:
the average method truncates (integer division by 3), the luminosity method
rounds half up and is evaluated in exact integer arithmetic so that e.g. a
pure red pixel (255, 0, 0) yields 77, not 76.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FisherlensError

# Weights of the luminosity formula, times 100. Summing to exactly 100 keeps
# (v, v, v) -> v an identity.
_LUM_R, _LUM_G, _LUM_B = 30, 59, 11


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: top-left corner (x, y), extent (w, h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise FisherlensError(f"rect must have positive extent, got {self}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def translate(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)


def iou(a: Rect, b: Rect) -> float:
    """Intersection-over-union of two rectangles."""
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class GrayImage:
    """8-bit grayscale image; ``pixels`` is an immutable HxW uint8 array."""

    def __init__(self, pixels):
        a = np.asarray(pixels)
        if a.ndim != 2 or a.size == 0:
            raise FisherlensError(f"grayscale image must be a non-empty 2-D array, got shape {a.shape}")
        if a.dtype != np.uint8:
            if np.any((a < 0) | (a > 255)):
                raise FisherlensError("grayscale intensities must lie in [0, 255]")
            a = a.astype(np.uint8)
        else:
            a = a.copy()
        self.pixels = _freeze(a)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


class RgbImage:
    """8-bit color image; ``pixels`` is an immutable HxWx3 uint8 array (R, G, B)."""

    def __init__(self, pixels):
        a = np.asarray(pixels)
        if a.ndim != 3 or a.shape[2] != 3 or a.size == 0:
            raise FisherlensError(f"color image must be a non-empty HxWx3 array, got shape {a.shape}")
        if a.dtype != np.uint8:
            if np.any((a < 0) | (a > 255)):
                raise FisherlensError("channel values must lie in [0, 255]")
            a = a.astype(np.uint8)
        else:
            a = a.copy()
        self.pixels = _freeze(a)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, RgbImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"RgbImage({self.width}x{self.height})"


def gray_average(img: RgbImage) -> GrayImage:
    """Average-method grayscale: floor((R + G + B) / 3) per pixel."""
    s = img.pixels.astype(np.uint32).sum(axis=2)
    return GrayImage((s // 3).astype(np.uint8))


def gray_luminosity(img: RgbImage) -> GrayImage:
    """Weighted grayscale 0.30 R + 0.59 G + 0.11 B, rounded half up.

    Evaluated as (30 R + 59 G + 11 B + 50) // 100 in integer arithmetic,
    which is the exact decimal value of the formula under half-up rounding.
    """
    p = img.pixels.astype(np.uint32)
    v = (_LUM_R * p[:, :, 0] + _LUM_G * p[:, :, 1] + _LUM_B * p[:, :, 2] + 50) // 100
    return GrayImage(v.astype(np.uint8))


def crop(img: GrayImage, r: Rect) -> GrayImage:
    """Extract the sub-image covered by ``r``. The rect must lie inside ``img``."""
    if r.x < 0 or r.y < 0 or r.x + r.w > img.width or r.y + r.h > img.height:
        raise FisherlensError(
            f"crop rect {r} out of bounds for {img.width}x{img.height} image"
        )
    return GrayImage(img.pixels[r.y : r.y + r.h, r.x : r.x + r.w])


def round_half_up(x):
    """Round to nearest integer, halves away from zero toward +inf. Array-safe."""
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Bilinear resample with pixel-center alignment.

    Source coordinate for destination index d is (d + 0.5) * scale - 0.5 with
    scale = in / out, clamped to the image borders. Output values are rounded
    half up. Resizing to the original dimensions is the identity.
    """
    if out_w < 1 or out_h < 1:
        raise FisherlensError(f"target dimensions must be >= 1, got {out_w}x{out_h}")
    if out_w == img.width and out_h == img.height:
        return GrayImage(img.pixels)

    src = img.pixels.astype(np.float64)
    in_h, in_w = src.shape

    def axis_coords(n_out: int, n_in: int) -> np.ndarray:
        scale = n_in / n_out
        c = (np.arange(n_out) + 0.5) * scale - 0.5
        return np.clip(c, 0.0, n_in - 1)

    xs = axis_coords(out_w, in_w)
    ys = axis_coords(out_h, in_h)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = xs - x0
    fy = ys - y0

    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return GrayImage(np.clip(round_half_up(out), 0, 255).astype(np.uint8))


class IntegralImage:
    """Zero-padded cumulative sums of an image and of its squared intensities.

    sums[y][x] holds the sum over all pixels (i, j) with i < y, j < x, so any
    rectangle sum is four lookups. int64 accumulators are exact for 8-bit
    images up to 4096x4096.
    """

    def __init__(self, img: GrayImage):
        p = img.pixels.astype(np.int64)
        h, w = p.shape
        self.width = w
        self.height = h
        sums = np.zeros((h + 1, w + 1), dtype=np.int64)
        sq = np.zeros((h + 1, w + 1), dtype=np.int64)
        np.cumsum(np.cumsum(p, axis=0), axis=1, out=sums[1:, 1:])
        np.cumsum(np.cumsum(p * p, axis=0), axis=1, out=sq[1:, 1:])
        self.sums = _freeze(sums)
        self.squared_sums = _freeze(sq)

    def rect_sum(self, r: Rect) -> int:
        """Exact sum of intensities inside ``r``."""
        return self._lookup(self.sums, r)

    def rect_sum_sq(self, r: Rect) -> int:
        """Exact sum of squared intensities inside ``r``."""
        return self._lookup(self.squared_sums, r)

    def _lookup(self, table: np.ndarray, r: Rect) -> int:
        if r.x < 0 or r.y < 0 or r.x + r.w > self.width or r.y + r.h > self.height:
            raise FisherlensError(
                f"rect {r} out of bounds for {self.width}x{self.height} integral image"
            )
        x0, y0, x1, y1 = r.x, r.y, r.x + r.w, r.y + r.h
        return int(table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0])


def integral(img: GrayImage) -> IntegralImage:
    return IntegralImage(img)
