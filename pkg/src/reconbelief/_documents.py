"""Helpers for the versioned JSON documents used across the package."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

from .errors import DocumentError

VERSION = 1


def check_document(doc: Any, kind: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(doc, dict):
        raise DocumentError(f"{kind} document must be a JSON object")
    required = set(required) | {"version"}
    allowed = required | set(optional)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise DocumentError(f"{kind} document has unknown keys: {', '.join(unknown)}")
    missing = sorted(required - set(doc))
    if missing:
        raise DocumentError(f"{kind} document is missing keys: {', '.join(missing)}")
    if doc["version"] != VERSION:
        raise DocumentError(f"{kind} document version {doc['version']!r} is not supported (expected {VERSION})")
    return doc


def parse_json(text: str | bytes, kind: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{kind} document is not valid JSON: {exc}") from exc


def read_json(path: str | Path, kind: str) -> Any:
    return parse_json(Path(path).read_text(encoding="utf-8"), kind)


def dump_json(doc: Any) -> str:
    # repr-precision floats (17 significant digits) survive a round trip exactly
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
