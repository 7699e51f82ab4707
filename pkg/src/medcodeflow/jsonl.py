"""JSON-lines IO with the conventions used by every artifact in this
package: UTF-8, LF line endings, one object per line, sorted keys on
write so identical content always produces identical bytes."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

__all__ = ["read_jsonl", "write_jsonl", "append_jsonl", "dump_json", "load_json"]


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def _dumps(record: Any) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_jsonl(path: str | Path, records: Iterable[Any]) -> int:
    """Write records atomically (tmp file + rename). Returns record count."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    n = 0
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(_dumps(record))
            fh.write("\n")
            n += 1
    tmp.replace(path)
    return n


def append_jsonl(path: str | Path, record: Any) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(record))
        fh.write("\n")


def dump_json(path: str | Path, value: Any) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(value, fh, sort_keys=True, ensure_ascii=False, indent=2)
        fh.write("\n")
    tmp.replace(path)


def load_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
