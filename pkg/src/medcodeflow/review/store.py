"""Append-only review decision log and expert ground-truth export.

Decisions are events, never updates. The store appends whole records to
a JSONL file and derives current state by replay, so a service restart
(or a fresh process reading the same file) reconstructs exactly the
state the last writer saw. The latest decision per (chart, code,
reviewer) wins, ordered by decided_at with the append sequence breaking
ties.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

from ..errors import IncompleteReview, InvalidDecision
from ..jsonl import append_jsonl, read_jsonl

VERDICTS = ("ACCEPT", "REJECT")

ACCEPT = "ACCEPT"
REJECT = "REJECT"


@dataclass(frozen=True)
class Decision:
    chart_id: str
    code: str
    reviewer_id: str
    verdict: str
    reason: str
    decided_at: str
    seq: int
    idempotency_key: str | None = None

    def to_dict(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "code": self.code,
            "reviewer_id": self.reviewer_id,
            "verdict": self.verdict,
            "reason": self.reason,
            "decided_at": self.decided_at,
            "seq": self.seq,
            "idempotency_key": self.idempotency_key,
        }

    @staticmethod
    def from_dict(data: dict) -> "Decision":
        return Decision(
            chart_id=data["chart_id"],
            code=data["code"],
            reviewer_id=data["reviewer_id"],
            verdict=data["verdict"],
            reason=data["reason"],
            decided_at=data["decided_at"],
            seq=data["seq"],
            idempotency_key=data.get("idempotency_key"),
        )


class DecisionStore:
    """Event log with optional JSONL persistence.

    With a path, every recorded decision is appended immediately;
    without one the store is memory-only, which tests use.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.events: list[Decision] = []
        self._by_key: dict[str, Decision] = {}
        if self.path is not None and self.path.exists():
            for rec in read_jsonl(self.path):
                self._ingest(Decision.from_dict(rec))

    def _ingest(self, decision: Decision) -> None:
        self.events.append(decision)
        if decision.idempotency_key:
            self._by_key.setdefault(decision.idempotency_key, decision)

    def record(
        self,
        chart_id: str,
        code: str,
        reviewer_id: str,
        verdict: str,
        reason: str = "",
        decided_at: str | None = None,
        idempotency_key: str | None = None,
    ) -> Decision:
        """Append one decision; replaying an idempotency key is a no-op."""
        if idempotency_key and idempotency_key in self._by_key:
            return self._by_key[idempotency_key]
        if verdict not in VERDICTS:
            raise InvalidDecision(f"verdict must be one of {VERDICTS}, got {verdict!r}")
        if verdict == REJECT and not reason.strip():
            raise InvalidDecision("a rejection requires a documented reason")
        if not reviewer_id:
            raise InvalidDecision("reviewer_id must be non-empty")
        if decided_at is None:
            decided_at = dt.datetime.now(dt.timezone.utc).isoformat()
        decision = Decision(
            chart_id=chart_id,
            code=code,
            reviewer_id=reviewer_id,
            verdict=verdict,
            reason=reason,
            decided_at=decided_at,
            seq=len(self.events),
            idempotency_key=idempotency_key,
        )
        self._ingest(decision)
        if self.path is not None:
            append_jsonl(self.path, decision.to_dict())
        return decision

    def latest(self) -> dict[tuple[str, str, str], Decision]:
        """Current decision per (chart_id, code, reviewer_id)."""
        state: dict[tuple[str, str, str], Decision] = {}
        for decision in self.events:
            key = (decision.chart_id, decision.code, decision.reviewer_id)
            current = state.get(key)
            if current is None or (decision.decided_at, decision.seq) >= (
                current.decided_at,
                current.seq,
            ):
                state[key] = decision
        return state

    def reviewers(self) -> list[str]:
        return sorted({d.reviewer_id for d in self.events})

    def label_verdicts(
        self, reviewer_id: str | None = None, consensus: bool = False
    ) -> dict[tuple[str, str], str]:
        """Resolved verdict per (chart_id, code).

        With a reviewer_id, that reviewer's latest decision counts. In
        consensus mode a label is ACCEPT only when every reviewer who
        decided it accepted. With neither, the store must contain a
        single reviewer, who is used implicitly.
        """
        state = self.latest()
        if reviewer_id is not None:
            return {
                (d.chart_id, d.code): d.verdict
                for d in state.values()
                if d.reviewer_id == reviewer_id
            }
        if not consensus:
            names = self.reviewers()
            if len(names) > 1:
                raise InvalidDecision(
                    f"store has {len(names)} reviewers ({', '.join(names)}); "
                    "name one or export with consensus"
                )
            reviewer_id = names[0] if names else None
            return {
                (d.chart_id, d.code): d.verdict
                for d in state.values()
                if d.reviewer_id == reviewer_id
            }
        verdicts: dict[tuple[str, str], str] = {}
        for d in state.values():
            key = (d.chart_id, d.code)
            if verdicts.get(key) == REJECT:
                continue
            verdicts[key] = d.verdict
        return verdicts


@dataclass(frozen=True)
class ExpertGroundTruth:
    """Accepted labels in corpus order, plus the session's accounting."""

    records: tuple[dict, ...]
    completeness: float
    undecided: tuple[tuple[str, str], ...]
    review_session_id: str


def export_ground_truth(
    gold_records: list[dict],
    store: DecisionStore,
    reviewer_id: str | None = None,
    consensus: bool = False,
    force: bool = False,
    session_id: str = "",
) -> ExpertGroundTruth:
    """Accepted labels become ground truth; anything undecided blocks.

    Every chart stays present even when all its labels were rejected,
    so downstream recall denominators see the empty document rather
    than a missing one.
    """
    verdicts = store.label_verdicts(reviewer_id=reviewer_id, consensus=consensus)
    labels = [
        (rec["chart_id"], assignment["code"])
        for rec in gold_records
        for assignment in rec["assignments"]
    ]
    undecided = tuple(key for key in labels if key not in verdicts)
    completeness = 1.0 if not labels else (len(labels) - len(undecided)) / len(labels)
    if undecided and not force:
        raise IncompleteReview(
            f"{len(undecided)} of {len(labels)} labels undecided", completeness
        )
    records = []
    for rec in gold_records:
        accepted = [
            dict(assignment, source="EXPERT")
            for assignment in rec["assignments"]
            if verdicts.get((rec["chart_id"], assignment["code"])) == ACCEPT
        ]
        records.append({"chart_id": rec["chart_id"], "assignments": accepted})
    return ExpertGroundTruth(
        records=tuple(records),
        completeness=completeness,
        undecided=undecided,
        review_session_id=session_id,
    )
