"""Deterministic JSON writing with 17-significant-digit floats.

The stdlib encoder prints the shortest round-trip repr, which is fine for
reading but makes the on-disk format depend on the Python version's repr
algorithm. Artifacts here use a fixed ``%.17g`` rendering instead.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if s == "-0":
        s = "-0.0"
    elif "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent, level, out):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," if indent else ", "
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(sep)
            out.append(pad)
            out.append(json.dumps(str(k), ensure_ascii=False))
            out.append(": ")
            _encode(v, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        # Numeric rows stay on one line to keep parameter dumps readable.
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj)
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", " if flat else sep)
            if not flat:
                out.append(pad)
            _encode(v, indent, level + 1, out)
        out.append("]" if flat else end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 1) -> str:
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_json(obj, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
    os.replace(tmp, path)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
