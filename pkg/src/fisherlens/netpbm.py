"""Reading and writing netpbm images: PGM (P2/P5) and PPM (P3/P6), maxval 255.

The parser follows the netpbm header conventions: tokens separated by
arbitrary whitespace, with ``#`` comments running to end of line anywhere in
the header. Raw pixel data starts after the single whitespace byte that
terminates the maxval token. PBM bitmaps and 16-bit depths are rejected.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import NetpbmError
from .imgproc import GrayImage, RgbImage

_WS = b" \t\r\n\x0b\x0c"


class _Scanner:
    def __init__(self, data: bytes, name: str):
        self.data = data
        self.pos = 0
        self.name = name

    def _skip_ws_and_comments(self):
        d, n = self.data, len(self.data)
        while self.pos < n:
            c = d[self.pos : self.pos + 1]
            if c in (b"#",):
                nl = d.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            elif c in _WS:
                self.pos += 1
            else:
                return

    def token(self) -> bytes:
        self._skip_ws_and_comments()
        if self.pos >= len(self.data):
            raise NetpbmError(f"{self.name}: truncated header")
        start = self.pos
        d, n = self.data, len(self.data)
        while self.pos < n and d[self.pos : self.pos + 1] not in _WS and d[self.pos] != ord("#"):
            self.pos += 1
        return d[start : self.pos]

    def int_token(self, what: str) -> int:
        t = self.token()
        try:
            return int(t)
        except ValueError:
            raise NetpbmError(f"{self.name}: expected integer for {what}, got {t[:20]!r}") from None


def parse_netpbm(data: bytes, name: str = "<bytes>"):
    """Parse PGM/PPM bytes into a GrayImage or RgbImage."""
    if not data:
        raise NetpbmError(f"{name}: empty document")
    sc = _Scanner(data, name)
    magic = sc.token()
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise NetpbmError(f"{name}: unsupported magic {magic[:8]!r} (want P2/P3/P5/P6)")
    width = sc.int_token("width")
    height = sc.int_token("height")
    maxval = sc.int_token("maxval")
    if width <= 0 or height <= 0:
        raise NetpbmError(f"{name}: non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise NetpbmError(f"{name}: only maxval 255 is supported, got {maxval}")

    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic in (b"P5", b"P6"):
        # exactly one whitespace byte separates the header from raw samples
        if sc.pos >= len(data) or data[sc.pos : sc.pos + 1] not in _WS:
            raise NetpbmError(f"{name}: missing whitespace before raw pixel data")
        start = sc.pos + 1
        raw = data[start : start + count]
        if len(raw) < count:
            raise NetpbmError(f"{name}: truncated pixel data, want {count} bytes got {len(raw)}")
        flat = np.frombuffer(raw, dtype=np.uint8, count=count)
    else:
        values = []
        try:
            for _ in range(count):
                values.append(sc.int_token("sample"))
        except NetpbmError:
            raise NetpbmError(
                f"{name}: truncated pixel data, want {count} samples got {len(values)}"
            ) from None
        flat = np.asarray(values)
        if np.any((flat < 0) | (flat > 255)):
            raise NetpbmError(f"{name}: sample out of range [0, 255]")
        flat = flat.astype(np.uint8)

    if channels == 1:
        return GrayImage(flat.reshape(height, width))
    return RgbImage(flat.reshape(height, width, 3))


def read_image(path):
    """Read a PGM or PPM file; returns GrayImage or RgbImage by format."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_netpbm(data, name=os.fspath(path))


def pgm_bytes(img: GrayImage, binary: bool = True) -> bytes:
    if binary:
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        return header + img.pixels.tobytes()
    lines = [f"P2\n{img.width} {img.height}\n255"]
    for row in img.pixels:
        lines.append(" ".join(str(int(v)) for v in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def ppm_bytes(img: RgbImage, binary: bool = True) -> bytes:
    if binary:
        header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
        return header + img.pixels.tobytes()
    lines = [f"P3\n{img.width} {img.height}\n255"]
    for row in img.pixels:
        lines.append(" ".join(str(int(v)) for v in row.reshape(-1)))
    return ("\n".join(lines) + "\n").encode("ascii")


def write_image(img, path, binary: bool = True):
    """Write a GrayImage as PGM or an RgbImage as PPM."""
    if isinstance(img, GrayImage):
        data = pgm_bytes(img, binary=binary)
    elif isinstance(img, RgbImage):
        data = ppm_bytes(img, binary=binary)
    else:
        raise NetpbmError(f"cannot serialize {type(img).__name__}")
    with open(path, "wb") as fh:
        fh.write(data)
