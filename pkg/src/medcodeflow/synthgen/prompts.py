"""Access to the versioned system prompt files."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from ..errors import TemplateMissing

_ROOT = Path(__file__).parent.parent / "data" / "prompts"


@lru_cache(maxsize=None)
def system_prompt(name: str, version: str = "v1") -> str:
    path = _ROOT / version / f"{name}.txt"
    if not path.exists():
        raise TemplateMissing(f"system prompt not found: {path}")
    return path.read_text(encoding="utf-8").strip()
