"""Canonical serialization shared by the audit chain and every JSONL store.

Hash equality across platforms requires bit-exact rendering: UTF-8,
lexicographically ordered keys, no insignificant whitespace, and decimals
written without trailing zeros or exponent notation.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from decimal import Decimal
from typing import Any, Sequence

UTC = timezone.utc


def format_decimal(value: Decimal) -> str:
    """Render a Decimal without exponent notation or trailing zeros."""
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("", "-0"):
        text = "0"
    return text


def format_timestamp(ts: datetime) -> str:
    """RFC 3339 with seconds precision, always UTC with a Z suffix."""
    return ts.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(raw: str) -> datetime:
    """Parse RFC 3339, normalizing to UTC and truncating to seconds."""
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    parsed = datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {raw!r}")
    return parsed.astimezone(UTC).replace(microsecond=0)


def canonical_dumps(obj: Any, key_order: Sequence[str] | None = None) -> str:
    """Serialize to canonical JSON.

    Keys are sorted unless `key_order` pins the top-level ordering (used by
    line formats whose documented field order is part of the interface).
    """
    out: list[str] = []
    _emit(obj, out, key_order)
    return "".join(out)


def _emit(obj: Any, out: list[str], key_order: Sequence[str] | None = None) -> None:
    if obj is None or isinstance(obj, (bool, int, float, str)):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, Decimal):
        out.append(format_decimal(obj))
    elif isinstance(obj, datetime):
        out.append(json.dumps(format_timestamp(obj)))
    elif isinstance(obj, dict):
        keys = list(key_order) if key_order is not None else sorted(obj)
        out.append("{")
        first = True
        for key in keys:
            if key_order is not None and key not in obj:
                continue
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _emit(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot canonically serialize {type(obj).__name__}")


def canonical_loads(text: str) -> Any:
    """Parse JSON keeping exact decimal values (floats become Decimal)."""
    return json.loads(text, parse_float=Decimal)
