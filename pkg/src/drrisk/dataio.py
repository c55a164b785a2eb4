"""Reading observation files and writing reproducible JSON reports.

Input files hold one decimal value per line with an optional header line
``x``.  Reports are JSON with sorted keys and floats written to 17
significant digits, so parsing a report and serializing it again gives the
same bytes.  Infinite values are written as the string ``"+inf"``; NaN (and
negative infinity) are rejected.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidDataError, InvalidInputError
from .models import ModelFamily, Observations

INF_TOKEN = "+inf"


def parse_observations(text: str, family: ModelFamily | None = None, source: str = "<input>") -> Observations:
    """Parse CSV text; errors cite the 1-based line number."""
    values = []
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if not values and line.lower() in ("x", '"x"'):
            continue
        try:
            v = float(line)
        except ValueError:
            raise InvalidDataError(f"{source}: row {lineno}: cannot parse {line!r} as a number") from None
        if not math.isfinite(v):
            raise InvalidDataError(f"{source}: row {lineno}: value {line!r} is not finite")
        if family is not None and family.is_pareto and not v > 1.0:
            raise InvalidDataError(f"{source}: row {lineno}: value {v!r} violates the Pareto support x > 1")
        values.append(v)
    if not values:
        raise InvalidDataError(f"{source}: no observations found")
    return Observations(np.array(values))


def read_observations(path, family: ModelFamily | None = None) -> Observations:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from None
    return parse_observations(text, family, source=str(path))


def _format_float(x: float) -> str:
    if math.isnan(x):
        raise InvalidInputError("NaN cannot be written to a report")
    if math.isinf(x):
        if x < 0:
            raise InvalidInputError("negative infinity cannot be written to a report")
        return json.dumps(INF_TOKEN)
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise InvalidInputError(f"report keys must be strings, got {key!r}")
            items.append(f"{pad}{json.dumps(key)}: {_encode(obj[key], indent, level + 1)}")
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not len(seq):
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise InvalidInputError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Canonical JSON text with a trailing newline."""
    return _encode(obj, indent, 0) + "\n"


def loads(text: str):
    """Parse a report; the ``"+inf"`` token is kept as a string."""
    return json.loads(text)
