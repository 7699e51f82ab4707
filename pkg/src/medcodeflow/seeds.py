"""Per-stage seed derivation.

A run takes a single root seed; every pipeline stage (and every unit of
work within a stage) derives its own generator from (root, stage, index)
so stages can be reordered, parallelized, or resumed without disturbing
each other's random streams.
"""

from __future__ import annotations

import random

from .hashing import stable_hash64

__all__ = ["derive_seed", "stage_rng"]


def derive_seed(root_seed: int, stage: str, index: int = 0) -> int:
    return stable_hash64(f"{root_seed}/{stage}/{index}")


def stage_rng(root_seed: int, stage: str, index: int = 0) -> random.Random:
    return random.Random(derive_seed(root_seed, stage, index))
