"""Stable hashing helpers.

Everything that feeds determinism guarantees (ids, seeds, manifests)
goes through these functions so the choice of hash is made exactly once.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

__all__ = [
    "stable_hash64",
    "content_hash",
    "json_hash",
    "file_sha256",
    "canonical_json",
]


def stable_hash64(text: str) -> int:
    """64-bit hash of a string, stable across processes and platforms."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def content_hash(*parts: str) -> str:
    """Hex digest over an ordered sequence of text parts.

    Parts are length-prefixed before hashing so ("ab", "c") and
    ("a", "bc") never collide.
    """
    h = hashlib.sha256()
    for part in parts:
        raw = part.encode("utf-8")
        h.update(str(len(raw)).encode("ascii"))
        h.update(b":")
        h.update(raw)
    return h.hexdigest()


def canonical_json(value: Any) -> str:
    """Deterministic JSON serialization (sorted keys, compact separators)."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def json_hash(value: Any) -> str:
    return content_hash(canonical_json(value))


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
