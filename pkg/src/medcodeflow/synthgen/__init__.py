"""Synthetic chart pipelines.

Diagnosis charts are produced in two phases: structural
meta-descriptions seed note generation, then a retrieval-constrained
labeling pass attaches codes with line evidence. Procedure charts go
through description resolution instead, and notes whose descriptions
cannot be resolved to catalog codes are discarded as a normal, audited
outcome. Every stage appends audit records; nothing silently drops.
"""

from .types import (
    AuditLog,
    AuditRecord,
    ClinicalChart,
    CodeAssignment,
    Discard,
    MetaDescription,
    Provenance,
)
from .phi import load_surnames, phi_findings, screen_lines
from .leakage import leakage_screen, token_shingles
from .meta import derive_meta, require_secure_context
from .icd import generate_icd_chart, label_icd_chart, load_domain_pools
from .cpt import generate_cpt_note, label_cpt_note
from .corpus import (
    DETERMINISTIC_CREATED_AT,
    CorpusConfig,
    load_meta_fixtures,
    relabel_corpus,
    run_corpus,
)

__all__ = [
    "MetaDescription",
    "Provenance",
    "ClinicalChart",
    "CodeAssignment",
    "AuditRecord",
    "AuditLog",
    "Discard",
    "phi_findings",
    "screen_lines",
    "load_surnames",
    "token_shingles",
    "leakage_screen",
    "derive_meta",
    "require_secure_context",
    "load_domain_pools",
    "load_meta_fixtures",
    "DETERMINISTIC_CREATED_AT",
    "generate_icd_chart",
    "label_icd_chart",
    "generate_cpt_note",
    "label_cpt_note",
    "CorpusConfig",
    "run_corpus",
    "relabel_corpus",
]
