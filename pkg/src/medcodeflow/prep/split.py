"""Persistent train/eval partitioning.

The split is a seeded shuffle over sorted chart ids with a 5% eval
cut. Once a manifest is written it is authoritative: re-splitting the
same corpus returns the stored partition even with a different seed,
and re-splitting a changed corpus fails loudly instead of silently
leaking evaluation charts into training.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError, ManifestConflict
from ..hashing import content_hash
from ..jsonl import dump_json, load_json

MIN_CHARTS = 20
EVAL_FRACTION = 0.05


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    ratio: tuple[float, float]
    train_ids: tuple[str, ...]
    eval_ids: tuple[str, ...]
    corpus_hash: str

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ratio": {"train": self.ratio[0], "eval": self.ratio[1]},
            "train_ids": list(self.train_ids),
            "eval_ids": list(self.eval_ids),
            "corpus_hash": self.corpus_hash,
        }

    @staticmethod
    def from_dict(data: dict) -> "SplitManifest":
        return SplitManifest(
            seed=int(data["seed"]),
            ratio=(float(data["ratio"]["train"]), float(data["ratio"]["eval"])),
            train_ids=tuple(data["train_ids"]),
            eval_ids=tuple(data["eval_ids"]),
            corpus_hash=data["corpus_hash"],
        )


def corpus_fingerprint(charts) -> str:
    """Order-independent hash over (chart_id, content) pairs."""
    items = sorted(
        (chart.chart_id, content_hash("\n".join(chart.lines))) for chart in charts
    )
    return content_hash(*(f"{cid}:{h}" for cid, h in items))


def split_corpus(
    charts, seed: int, manifest_path: str | Path | None = None
) -> SplitManifest:
    """Partition charts 95/5, persisting and honoring an existing manifest."""
    charts = list(charts)
    if len(charts) < MIN_CHARTS:
        raise DataError(
            f"need at least {MIN_CHARTS} charts to split, got {len(charts)}"
        )
    fingerprint = corpus_fingerprint(charts)
    if manifest_path is not None:
        path = Path(manifest_path)
        if path.exists():
            stored = SplitManifest.from_dict(load_json(path))
            if stored.corpus_hash != fingerprint:
                raise ManifestConflict(
                    "stored split manifest was built from a different corpus; "
                    "refusing to re-split (delete the manifest to start over)"
                )
            return stored
    ids = sorted(chart.chart_id for chart in charts)
    rng = random.Random(seed)
    rng.shuffle(ids)
    eval_n = math.ceil(EVAL_FRACTION * len(ids))
    manifest = SplitManifest(
        seed=seed,
        ratio=(1 - EVAL_FRACTION, EVAL_FRACTION),
        train_ids=tuple(sorted(ids[eval_n:])),
        eval_ids=tuple(sorted(ids[:eval_n])),
        corpus_hash=fingerprint,
    )
    if manifest_path is not None:
        dump_json(manifest_path, manifest.to_dict())
    return manifest


def load_manifest(path: str | Path) -> SplitManifest:
    return SplitManifest.from_dict(load_json(path))
