"""Canonical JSON serialization shared by episode logs and the wire protocol.

One encoding rule everywhere: keys sorted, floats printed with 17 significant
digits (lossless for float64), no whitespace. Identical values always produce
identical bytes, which is what makes episode files diffable and lets the
determinism checks compare files byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float not serializable: {x!r}")
    s = format(x, ".17g")
    if "." in s or "e" in s or "E" in s:
        return s
    return s + ".0"  # integral floats stay unambiguously floats


_STR_CACHE: dict = {}


def _json_str(s: str) -> str:
    cached = _STR_CACHE.get(s)
    if cached is None:
        cached = json.dumps(s, ensure_ascii=False)
        if len(_STR_CACHE) < 4096:
            _STR_CACHE[s] = cached
    return cached


def canonical_dumps(obj: Any) -> str:
    """Serialize to canonical one-line JSON (sorted keys, 17-digit floats)."""
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def _write(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, str):
        out.append(_json_str(obj))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"non-string key: {key!r}")
            if not first:
                out.append(",")
            first = False
            out.append(_json_str(key))
            out.append(":")
            _write(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    else:
        # numpy scalars and arrays funnel through here
        if hasattr(obj, "item") and not hasattr(obj, "__len__"):
            _write(obj.item(), out)
        elif hasattr(obj, "tolist"):
            _write(obj.tolist(), out)
        else:
            raise TypeError(f"unserializable type: {type(obj)!r}")


def canonical_digest(obj: Any) -> str:
    """sha256 hex digest of the canonical serialization."""
    return hashlib.sha256(canonical_dumps(obj).encode("utf-8")).hexdigest()
