"""Exact nearest-neighbor index over catalog code descriptions.

Retrieval is deliberately exact (full scan, cosine over unit vectors)
so that candidate generation is reproducible across runs and machines;
catalog scale makes approximate search unnecessary. Ties are broken by
lexicographic code order.

On disk the index is a small binary file: a magic line, a JSON header
(system, dim, provider id, item count), then per-item records with the
code, description, and the little-endian float32 vector. Vectors are
quantized to float32 at build time so save/load round-trips bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import CorruptIndex, DimensionMismatch, EmptyCatalog, ProviderMismatch
from .jsonl import append_jsonl, read_jsonl
from .taxonomy import CodeCatalog

__all__ = [
    "CodeIndex",
    "RetrievalResult",
    "build_index",
    "save_index",
    "load_index",
    "export_index_jsonl",
    "query_top_n",
    "fallback_expand",
]

_MAGIC = b"MCFIDX1\n"

DEFAULT_TOP_N = 10
DEFAULT_MAX_N = 50


@dataclass
class CodeIndex:
    system: str
    dim: int
    provider_id: str
    codes: list[str]
    descriptions: list[str]
    vectors: np.ndarray  # (n, dim) float32, unit norm, rows sorted by code

    def __len__(self) -> int:
        return len(self.codes)

    def check_provider(self, provider_id: str) -> None:
        if provider_id != self.provider_id:
            raise ProviderMismatch(
                f"index built with {self.provider_id!r}, "
                f"pipeline configured with {provider_id!r}"
            )


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked candidates with the query context that produced them."""

    candidates: list[tuple[str, float]]
    n_requested: int
    expanded: bool


def build_index(
    catalog: CodeCatalog,
    provider,
    batch_size: int = 64,
    progress_path: str | Path | None = None,
) -> CodeIndex:
    """Embed every catalog description into a queryable index.

    When `progress_path` is given, per-batch progress is persisted
    there as JSON lines so an interrupted build resumes instead of
    re-embedding from scratch.
    """
    codes = catalog.codes()
    if not codes:
        raise EmptyCatalog("cannot index an empty catalog")

    done: dict[str, np.ndarray] = {}
    if progress_path is not None and Path(progress_path).exists():
        for rec in read_jsonl(progress_path):
            done[rec["code"]] = np.asarray(rec["vector"], dtype=np.float32)

    pending = [c for c in codes if c not in done]
    for start in range(0, len(pending), batch_size):
        batch = pending[start : start + batch_size]
        vectors = provider.embed([catalog.entries[c] for c in batch])
        if vectors.shape[1] != provider.dim:
            raise DimensionMismatch(
                f"provider returned dim {vectors.shape[1]}, declared {provider.dim}"
            )
        for code, vec in zip(batch, vectors):
            done[code] = vec.astype(np.float32)
            if progress_path is not None:
                append_jsonl(progress_path, {"code": code, "vector": vec.tolist()})

    matrix = np.stack([done[c] for c in codes]).astype(np.float32)
    index = CodeIndex(
        system=catalog.system,
        dim=int(matrix.shape[1]),
        provider_id=provider.provider_id,
        codes=codes,
        descriptions=[catalog.entries[c] for c in codes],
        vectors=matrix,
    )
    if progress_path is not None and Path(progress_path).exists():
        Path(progress_path).unlink()
    return index


def save_index(index: CodeIndex, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    header = json.dumps(
        {
            "count": len(index),
            "dim": index.dim,
            "provider_id": index.provider_id,
            "system": index.system,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for code, desc, vec in zip(index.codes, index.descriptions, index.vectors):
            code_b = code.encode("utf-8")
            desc_b = desc.encode("utf-8")
            fh.write(struct.pack("<H", len(code_b)))
            fh.write(code_b)
            fh.write(struct.pack("<I", len(desc_b)))
            fh.write(desc_b)
            fh.write(vec.astype("<f4").tobytes())
    tmp.replace(path)


def load_index(path: str | Path) -> CodeIndex:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise CorruptIndex(f"{path}: bad magic")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        count, dim = header["count"], header["dim"]
        codes: list[str] = []
        descriptions: list[str] = []
        vectors = np.empty((count, dim), dtype=np.float32)
        for i in range(count):
            raw = fh.read(2)
            if len(raw) != 2:
                raise CorruptIndex(f"{path}: truncated at item {i}")
            (code_len,) = struct.unpack("<H", raw)
            codes.append(fh.read(code_len).decode("utf-8"))
            (desc_len,) = struct.unpack("<I", fh.read(4))
            descriptions.append(fh.read(desc_len).decode("utf-8"))
            buf = fh.read(4 * dim)
            if len(buf) != 4 * dim:
                raise CorruptIndex(f"{path}: truncated vector at item {i}")
            vectors[i] = np.frombuffer(buf, dtype="<f4")
        if fh.read(1):
            raise CorruptIndex(f"{path}: trailing bytes after {count} items")
    return CodeIndex(
        system=header["system"],
        dim=dim,
        provider_id=header["provider_id"],
        codes=codes,
        descriptions=descriptions,
        vectors=vectors,
    )


def export_index_jsonl(index: CodeIndex, path: str | Path) -> None:
    """Human-inspectable mirror of the binary index."""
    from .jsonl import write_jsonl

    write_jsonl(
        path,
        (
            {"code": c, "description": d, "vector": [float(x) for x in v]}
            for c, d, v in zip(index.codes, index.descriptions, index.vectors)
        ),
    )


def query_top_n(index: CodeIndex, query_vec: np.ndarray, n: int) -> RetrievalResult:
    """Exact top-n by cosine score, ties broken by code order."""
    if n <= 0:
        raise ValueError("n must be positive")
    query_vec = np.asarray(query_vec)
    if query_vec.shape != (index.dim,):
        raise DimensionMismatch(
            f"query has shape {query_vec.shape}, index dim is {index.dim}"
        )
    scores = index.vectors.astype(np.float64) @ query_vec.astype(np.float64)
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.codes[i]))
    top = order[: min(n, len(index))]
    return RetrievalResult(
        candidates=[(index.codes[i], float(scores[i])) for i in top],
        n_requested=n,
        expanded=False,
    )


def fallback_expand(
    index: CodeIndex,
    query_vec: np.ndarray,
    n: int = DEFAULT_TOP_N,
    max_n: int = DEFAULT_MAX_N,
    accept: Callable[[str, float], bool] | None = None,
) -> RetrievalResult:
    """Top-n retrieval with doubling expansion.

    The first `n` candidates are evaluated with `accept`; if none pass,
    the window doubles (capped at `max_n`) and is re-evaluated, until
    something is accepted or the cap is reached. `accept=None` accepts
    everything, leaving filtering to a downstream constrained selector.
    Returns only accepted candidates; empty with `expanded=True` when
    the cap is exhausted.
    """
    if n > max_n:
        raise ValueError(f"n={n} exceeds max_n={max_n}")
    current = n
    while True:
        result = query_top_n(index, query_vec, current)
        accepted = [
            (code, score)
            for code, score in result.candidates
            if accept is None or accept(code, score)
        ]
        if accepted:
            return RetrievalResult(accepted, n_requested=n, expanded=current > n)
        if current >= min(max_n, len(index)):
            return RetrievalResult([], n_requested=n, expanded=True)
        current = min(current * 2, max_n)
