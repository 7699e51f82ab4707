"""Sequence packing for training efficiency.

Samples are concatenated greedily in input order, separated by a
single reserved delimiter token, as long as the combined length stays
within the budget. Position ids restart at 0 for every segment so
attention treats each sample as its own context; the delimiter extends
the run of the segment it closes.

`unpack` is the audited inverse: it re-derives the original token
streams from the segment table and refuses anything inconsistent.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import CorruptSegments, OversizedSample
from .tokenizer import DELIMITER_ID

MAX_LEN = 8192


@dataclass(frozen=True)
class Segment:
    sample_id: str
    start: int
    end: int


@dataclass(frozen=True)
class PackedSequence:
    token_ids: tuple[int, ...]
    segments: tuple[Segment, ...]
    position_ids: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "token_ids": list(self.token_ids),
            "segments": [[s.sample_id, s.start, s.end] for s in self.segments],
            "position_ids": list(self.position_ids),
        }

    @staticmethod
    def from_dict(data: dict) -> "PackedSequence":
        return PackedSequence(
            token_ids=tuple(data["token_ids"]),
            segments=tuple(Segment(s[0], int(s[1]), int(s[2])) for s in data["segments"]),
            position_ids=tuple(data["position_ids"]),
        )


def pack(items, max_len: int = MAX_LEN, delimiter_id: int = DELIMITER_ID):
    """Next-fit packing of (sample_id, token_ids) pairs.

    A sample joins the open sequence when its length plus one delimiter
    fits, otherwise it opens a new sequence. Input order is preserved;
    nothing is dropped or reordered.
    """
    sequences: list[PackedSequence] = []
    tokens: list[int] = []
    segments: list[Segment] = []
    positions: list[int] = []

    def flush():
        nonlocal tokens, segments, positions
        if segments:
            sequences.append(
                PackedSequence(tuple(tokens), tuple(segments), tuple(positions))
            )
        tokens, segments, positions = [], [], []

    for sample_id, ids in items:
        ids = list(ids)
        if len(ids) > max_len:
            raise OversizedSample(
                f"sample {sample_id!r} has {len(ids)} tokens, budget is {max_len}"
            )
        cost = len(ids) if not segments else len(ids) + 1
        if len(tokens) + cost > max_len:
            flush()
        if segments:
            # Delimiter closes the previous segment and continues its
            # position run.
            tokens.append(delimiter_id)
            positions.append(segments[-1].end - segments[-1].start)
        start = len(tokens)
        tokens.extend(ids)
        positions.extend(range(len(ids)))
        segments.append(Segment(sample_id, start, start + len(ids)))
    flush()
    return sequences


def pack_samples(samples, tokenizer, max_len: int = MAX_LEN, delimiter_id: int = DELIMITER_ID):
    """Pack rendered training samples using their full text."""
    return pack(
        ((s.sample_id, tokenizer.encode(s.full_text())) for s in samples),
        max_len=max_len,
        delimiter_id=delimiter_id,
    )


def unpack(seq: PackedSequence, delimiter_id: int = DELIMITER_ID):
    """Recover (sample_id, token_ids) pairs, verifying the segment table."""
    if not seq.segments:
        if seq.token_ids or seq.position_ids:
            raise CorruptSegments("tokens present but no segments")
        return []
    if len(seq.position_ids) != len(seq.token_ids):
        raise CorruptSegments("position_ids length differs from token_ids")
    if seq.segments[0].start != 0:
        raise CorruptSegments("first segment does not start at 0")
    if seq.segments[-1].end != len(seq.token_ids):
        raise CorruptSegments("last segment does not end at the stream end")
    out = []
    for i, seg in enumerate(seq.segments):
        if seg.end <= seg.start:
            raise CorruptSegments(f"segment {seg.sample_id!r} is empty or inverted")
        if i + 1 < len(seq.segments):
            nxt = seq.segments[i + 1]
            if nxt.start != seg.end + 1:
                raise CorruptSegments(
                    f"gap between segments {seg.sample_id!r} and {nxt.sample_id!r} "
                    "is not exactly one delimiter"
                )
            if seq.token_ids[seg.end] != delimiter_id:
                raise CorruptSegments(
                    f"expected delimiter after segment {seg.sample_id!r}"
                )
        span = seq.position_ids[seg.start : seg.end]
        if list(span) != list(range(seg.end - seg.start)):
            raise CorruptSegments(
                f"position run for segment {seg.sample_id!r} does not reset to 0"
            )
        out.append((seg.sample_id, list(seq.token_ids[seg.start : seg.end])))
    return out


def packing_efficiency(sequences, max_len: int = MAX_LEN) -> float:
    """Share of sequence capacity holding sample tokens (not delimiters)."""
    if not sequences:
        return 0.0
    used = sum(seg.end - seg.start for seq in sequences for seg in seq.segments)
    return used / (len(sequences) * max_len)
