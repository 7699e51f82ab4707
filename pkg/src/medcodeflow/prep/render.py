"""Render labeled notes into training samples.

A sample is the concatenation of a versioned system prompt, a task
instruction, the numbered note, and a target that is the canonical
serialization of the assignment list. The target must parse under the
same schema validator the generation gateway uses, so training format
and inference format cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..errors import TemplateMissing
from ..gateway.blocks import format_note_lines
from ..hashing import canonical_json, content_hash
from ..metrics.matching import normalize_icd_lenient
from ..taxonomy import CPT, ICD10CM, render_icd
from .augment import LabeledNote

_PROMPTS_ROOT = Path(__file__).parent.parent / "data" / "prompts"

_FILES = {
    ICD10CM: ("train_system_icd.txt", "train_instruction_icd.txt"),
    CPT: ("train_system_cpt.txt", "train_instruction_cpt.txt"),
}


@dataclass(frozen=True)
class TemplatePack:
    name: str
    coding_system: str
    system_text: str
    instruction_text: str


@dataclass(frozen=True)
class TrainingSample:
    sample_id: str
    prompt_text: str
    target_text: str
    token_count: int
    origin_chart_ids: tuple[str, ...]

    def full_text(self) -> str:
        return self.prompt_text + "\n" + self.target_text

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "prompt_text": self.prompt_text,
            "target_text": self.target_text,
            "token_count": self.token_count,
            "origin_chart_ids": list(self.origin_chart_ids),
        }


def load_template_pack(
    coding_system: str = ICD10CM,
    version: str = "v1",
    root: str | Path | None = None,
) -> TemplatePack:
    """Load the versioned system/instruction pair for one coding system."""
    if coding_system not in _FILES:
        raise ValueError(f"unknown coding system {coding_system!r}")
    base = Path(root) if root is not None else _PROMPTS_ROOT
    directory = base / version
    texts = []
    for filename in _FILES[coding_system]:
        path = directory / filename
        if not path.exists():
            raise TemplateMissing(f"template file not found: {path}")
        texts.append(path.read_text(encoding="utf-8").strip())
    return TemplatePack(
        name=f"{coding_system.lower()}@{version}",
        coding_system=coding_system,
        system_text=texts[0],
        instruction_text=texts[1],
    )


def serialize_target(note: LabeledNote, coding_system: str) -> str:
    """Canonical JSON assignment list, sorted by code for determinism."""
    items = sorted(note.assignments, key=lambda a: a.code)
    if coding_system == ICD10CM:
        payload = [
            {
                "code": render_icd(normalize_icd_lenient(a.code)),
                "rationale": a.rationale,
                "evidence": {
                    "line_index": sorted(a.evidence_lines),
                    "quote": None,
                },
            }
            for a in items
        ]
    else:
        payload = [{"code": a.code, "rationale": a.rationale} for a in items]
    return canonical_json(payload)


def render_prompt(note: LabeledNote, pack: TemplatePack, tokenizer) -> TrainingSample:
    """Produce one training sample; identical inputs give identical ids."""
    prompt_text = "\n\n".join(
        [
            pack.system_text,
            pack.instruction_text,
            format_note_lines(list(note.lines)),
        ]
    )
    target_text = serialize_target(note, pack.coding_system)
    full = prompt_text + "\n" + target_text
    return TrainingSample(
        sample_id="s-" + content_hash(pack.name, prompt_text, target_text)[:16],
        prompt_text=prompt_text,
        target_text=target_text,
        token_count=tokenizer.count(full),
        origin_chart_ids=note.origin_chart_ids or (note.chart_id,),
    )
