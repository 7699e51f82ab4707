"""Toolkit for privacy-preserving medical coding pipelines.

Covers the full loop: synthetic clinical chart generation seeded from
catalog codes, evidence-linked labeling through embedding retrieval plus
schema-constrained chat models, training-data preparation (dedupe, split,
augmentation, sequence packing), hierarchical evaluation metrics, and an
expert review service with an append-only decision log.
"""

PIPELINE_VERSION = "0.1.0"

__all__ = ["PIPELINE_VERSION"]
