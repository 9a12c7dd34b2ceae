"""Deterministic CSV/JSON artifacts.

Floats are written with 17 significant digits, rows in a fixed order, and
every file is written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "null" if not math.isfinite(float(v)) else fmt(v)
    if isinstance(v, (complex, np.complexfloating)):
        return "[" + fmt(v.real) + ", " + fmt(v.imag) + "]"
    if isinstance(v, str):
        return json.dumps(v)
    return None


def dumps_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with keys in insertion order and floats at 17 significant digits.

    Non-finite floats become ``null``; complex numbers become ``[re, im]``.
    """
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    scalar = _json_value(obj)
    if scalar is not None:
        return scalar
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        parts = [dumps_json(v, indent, _level + 1) for v in obj]
        if all("\n" not in p for p in parts) and sum(map(len, parts)) < 100:
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps_json(obj) + "\n")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write(path, csv_text(header, rows))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read back an artifact written by :func:`write_csv` (numeric columns only)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
