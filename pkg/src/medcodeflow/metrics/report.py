"""Assemble evaluation results into a report and write it to disk.

One JSON report carries everything machine-readable; a markdown
rendering, a frequency CSV and an outlier CSV are written alongside it
for quick inspection. All four files are always produced so downstream
tooling can rely on the paths, even when a section is empty.
"""

from __future__ import annotations

import csv
from dataclasses import asdict
from pathlib import Path

from .aggregate import (
    CodeRow,
    GroupStats,
    aggregate_corpus,
    evidence_jaccard_mean,
    group_stats,
    per_category_rows,
    per_code_rows,
    response_quality,
    weighted_domain_aggregate,
)
from .frequency import frequency_analysis
from .matching import DocPair, evaluate_corpus, evaluate_cpt_document
from .outliers import iqr_outliers
from ..errors import MalformedCode, UnmappedCategory
from ..jsonl import dump_json
from ..taxonomy import (
    CPT,
    ICD10CM,
    CodeCatalog,
    chapter_of,
    parse_cpt,
    parse_icd,
    specialty_of,
)

REPORT_SCHEMA = "medcodeflow/eval-report/v1"


def build_eval_report(
    system: str,
    pairs: list[DocPair],
    catalog: CodeCatalog | None = None,
    domains: dict[str, str] | None = None,
    train_counts: dict[str, int] | None = None,
    run: dict | None = None,
    min_cases: int = 10,
) -> dict:
    """Score a corpus of prediction/gold pairs and collect every table.

    `domains` maps chart ids to a grouping label (typically the
    generation domain). `train_counts` maps the per-group key used by
    the frequency analysis (category prefix for diagnoses, full code
    for procedures) to its training occurrence count.
    """
    if system == ICD10CM:
        doc_evals = evaluate_corpus(pairs)
        code_rows = per_code_rows(pairs)
        grouping_rows = per_category_rows(pairs)
        headline_level = "3"
    elif system == CPT:
        doc_evals = [evaluate_cpt_document(pair) for pair in pairs]
        code_rows = per_code_rows(pairs, level=None, normalize=_cpt_key)
        grouping_rows = code_rows
        headline_level = "exact"
    else:
        raise ValueError(f"unknown coding system {system!r}")

    report: dict = {
        "schema": REPORT_SCHEMA,
        "system": system,
        "doc_count": len(pairs),
        "headline_level": headline_level,
        "levels": aggregate_corpus(doc_evals),
        "response_quality": response_quality(doc_evals),
        "duplicate_pred_codes": sum(d.duplicate_pred_codes for d in doc_evals),
        "per_code": [asdict(row) for row in code_rows],
        "outliers": _outlier_section(grouping_rows, min_cases),
        "frequency": None,
        "run": run,
    }
    if system == ICD10CM:
        report["evidence_jaccard_mean"] = evidence_jaccard_mean(doc_evals)
        report["per_category"] = [asdict(row) for row in grouping_rows]
        if catalog is not None:
            report["per_chapter"] = _range_groups(
                grouping_rows, lambda key: _chapter_label(key, catalog)
            )
    elif catalog is not None:
        report["per_specialty"] = _range_groups(
            grouping_rows, lambda key: _specialty_label(key, catalog)
        )
    if domains:
        report["per_domain"] = _domain_section(doc_evals, domains, headline_level)
    if train_counts is not None:
        freq = frequency_analysis(grouping_rows, train_counts)
        report["frequency"] = {
            "rows": [asdict(row) for row in freq["rows"]],
            "bins": freq["bins"],
        }
    return report


def _cpt_key(code: str) -> str:
    try:
        return parse_cpt(code).normalized
    except MalformedCode:
        return code.strip().upper()


def _chapter_label(category: str, catalog: CodeCatalog) -> str | None:
    try:
        return chapter_of(parse_icd(category), catalog).label
    except (MalformedCode, UnmappedCategory):
        return None


def _specialty_label(code: str, catalog: CodeCatalog) -> str | None:
    try:
        entry = specialty_of(parse_cpt(code), catalog)
    except MalformedCode:
        return None
    return entry.label if entry is not None else None


def _range_groups(rows: list[CodeRow], label_of) -> list[dict]:
    """Weighted per-range rollup of per-key rows, heaviest groups first."""
    grouped: dict[str, list[CodeRow]] = {}
    for row in rows:
        label = label_of(row.key)
        if label is None:
            continue
        grouped.setdefault(label, []).append(row)
    out = []
    for label in sorted(grouped):
        members = grouped[label]
        stats = [
            GroupStats(row.key, max(row.n_cases, 1), row.precision, row.recall, row.f1)
            for row in members
        ]
        combined = weighted_domain_aggregate(stats, name=label)
        out.append(
            {
                "name": label,
                "n_cases": sum(row.n_cases for row in members),
                "n_keys": len(members),
                "precision": combined.precision,
                "recall": combined.recall,
                "f1": combined.f1,
            }
        )
    out.sort(key=lambda item: (-item["n_cases"], item["name"]))
    return out


def _domain_section(doc_evals, domains, headline_level) -> list[dict]:
    by_domain: dict[str, list] = {}
    for doc in doc_evals:
        label = domains.get(doc.chart_id)
        if label is None:
            continue
        by_domain.setdefault(label, []).append(doc.scores[headline_level])
    rows = [group_stats(label, by_domain[label]) for label in sorted(by_domain)]
    if rows:
        rows.append(weighted_domain_aggregate(rows, name="Combined"))
    return [asdict(row) for row in rows]


def _outlier_section(rows: list[CodeRow], min_cases: int) -> dict:
    result = iqr_outliers(rows, min_cases)
    flagged_keys = {row.key for row in result.flagged}
    return {
        "q1": result.q1,
        "q3": result.q3,
        "lower_bound": result.lower_bound,
        "eligible_count": result.eligible_count,
        "min_cases": min_cases,
        "warning": result.warning,
        "flagged": [asdict(row) for row in result.flagged],
        "rows": [
            dict(asdict(row), flagged=row.key in flagged_keys)
            for row in result.eligible
        ],
    }


def write_report_files(report: dict, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, report.md, freq.csv and outliers.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report_json": out / "report.json",
        "report_md": out / "report.md",
        "freq_csv": out / "freq.csv",
        "outliers_csv": out / "outliers.csv",
    }
    dump_json(paths["report_json"], report)
    paths["report_md"].write_text(render_markdown(report), encoding="utf-8")

    with paths["freq_csv"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "train_count", "f1", "bin_low", "bin_high"])
        for row in (report.get("frequency") or {}).get("rows", []):
            writer.writerow(
                [row["key"], row["train_count"], f"{row['f1']:.6f}", row["bin_low"], row["bin_high"]]
            )

    with paths["outliers_csv"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "f1", "n_cases", "flagged"])
        for row in report["outliers"]["rows"]:
            writer.writerow(
                [row["key"], f"{row['f1']:.6f}", row["n_cases"], str(row["flagged"]).lower()]
            )
    return paths


def render_markdown(report: dict) -> str:
    """Human-oriented summary of the headline numbers."""
    lines = [
        "# Evaluation report",
        "",
        f"- System: {report['system']}",
        f"- Documents: {report['doc_count']}",
        f"- Response quality (empty predictions): {report['response_quality']:.4f}",
    ]
    jaccard = report.get("evidence_jaccard_mean")
    if jaccard is not None:
        lines.append(f"- Mean evidence Jaccard over matched codes: {jaccard:.4f}")
    lines += ["", "## Scores by level", ""]
    lines.append("| level | macro P | macro R | macro F1 | micro F1 |")
    lines.append("| --- | --- | --- | --- | --- |")
    for key, stats in report["levels"].items():
        lines.append(
            "| {level} | {mp:.4f} | {mr:.4f} | {mf:.4f} | {uf:.4f} |".format(
                level=key,
                mp=stats["macro"]["precision"],
                mr=stats["macro"]["recall"],
                mf=stats["macro"]["f1"],
                uf=stats["micro"]["f1"],
            )
        )
    domains = report.get("per_domain")
    if domains:
        lines += ["", "## Domains", ""]
        lines.append("| domain | cases | P | R | F1 |")
        lines.append("| --- | --- | --- | --- | --- |")
        for row in domains:
            lines.append(
                "| {name} | {n} | {p:.4f} | {r:.4f} | {f:.4f} |".format(
                    name=row["name"],
                    n=row["n_cases"],
                    p=row["precision"],
                    r=row["recall"],
                    f=row["f1"],
                )
            )
    outliers = report["outliers"]
    lines += ["", "## Underperforming groups", ""]
    if outliers["warning"]:
        lines.append(f"Skipped: {outliers['warning']}.")
    elif outliers["flagged"]:
        bound = outliers["lower_bound"]
        lines.append(f"Flagged below F1 {bound:.4f}:")
        lines.append("")
        for row in outliers["flagged"]:
            lines.append(
                f"- {row['key']}: F1 {row['f1']:.4f} over {row['n_cases']} cases"
            )
    else:
        lines.append("None flagged.")
    lines.append("")
    return "\n".join(lines)
