"""Dataset preparation: dedupe, split, augment, render, pack.

Everything here is deterministic given its seed. The eval partition is
split off first and never augmented or packed; augmentation and
packing apply to training data only.
"""

from .tokenizer import DELIMITER_ID, WhitespaceTokenizer
from .dedupe import DedupeResult, dedupe, shingle_jaccard, shingles
from .split import SplitManifest, load_manifest, split_corpus
from .augment import AugmentResult, LabeledNote, augment
from .render import TemplatePack, TrainingSample, load_template_pack, render_prompt
from .packing import (
    PackedSequence,
    Segment,
    pack,
    pack_samples,
    packing_efficiency,
    unpack,
)

__all__ = [
    "WhitespaceTokenizer",
    "DELIMITER_ID",
    "DedupeResult",
    "dedupe",
    "shingles",
    "shingle_jaccard",
    "SplitManifest",
    "split_corpus",
    "load_manifest",
    "LabeledNote",
    "AugmentResult",
    "augment",
    "TemplatePack",
    "TrainingSample",
    "load_template_pack",
    "render_prompt",
    "Segment",
    "PackedSequence",
    "pack",
    "pack_samples",
    "unpack",
    "packing_efficiency",
]
