"""Deterministic JSON serialization shared by all machine-readable outputs.

Floats are printed with 17 significant digits (exact round-trip for IEEE 754
doubles) and dict keys keep insertion order, so identical in-memory documents
always serialize to identical bytes. Parsing is plain ``json.loads``.
"""

from __future__ import annotations

import json
import math


class FixedFloat(float):
    """Float that serializes with a fixed number of decimal places.

    Used by report documents whose numbers are quoted to 4 decimals in both
    the text and machine forms; plain floats keep the exact 17-digit form.
    """

    __slots__ = ("decimals",)

    def __new__(cls, value, decimals: int = 4):
        self = super().__new__(cls, round(float(value), decimals))
        self.decimals = decimals
        return self


def _emit(obj, out: list):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, FixedFloat):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite float {obj!r}")
        out.append(format(obj, f".{obj.decimals}f"))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite float {obj!r}")
        out.append(format(obj, ".17g"))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if not isinstance(k, str):
                raise TypeError(f"JSON object keys must be str, got {type(k).__name__}")
            if i:
                out.append(",")
            out.append(json.dumps(k))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    out: list = []
    _emit(obj, out)
    return "".join(out)


def dump_path(obj, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load_path(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
