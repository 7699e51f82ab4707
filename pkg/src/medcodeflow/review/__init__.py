"""Expert review: decision store, ground-truth export, domain-filtered
evaluation against expert labels, and the HTTP review service."""

from .expert import (
    evaluate_expert,
    filter_domain,
    load_domain_categories,
    mean_sem,
)
from .store import (
    ACCEPT,
    REJECT,
    VERDICTS,
    Decision,
    DecisionStore,
    ExpertGroundTruth,
    export_ground_truth,
)

__all__ = [
    "ACCEPT",
    "REJECT",
    "VERDICTS",
    "Decision",
    "DecisionStore",
    "ExpertGroundTruth",
    "evaluate_expert",
    "export_ground_truth",
    "filter_domain",
    "load_domain_categories",
    "mean_sem",
]
