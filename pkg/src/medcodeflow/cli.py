"""Command-line entry point.

One subcommand per pipeline stage. Every command writes its artifacts
plus a run_manifest.json into --out-dir; verify-run re-hashes a
manifest's files and confirms nothing drifted. All randomness flows
from a single --seed that each stage expands internally, so a rerun
with the same flags and mock providers reproduces every output byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .codeindex import (
    DEFAULT_MAX_N,
    DEFAULT_TOP_N,
    build_index,
    export_index_jsonl,
    load_index,
    save_index,
)
from .embedding import TokenHashEmbedder
from .errors import DataError, ProviderError
from .gateway import ChatGateway, GatewayConfig, MockChatProvider
from .jsonl import dump_json, load_json, read_jsonl, write_jsonl
from .metrics import Assignment, DocPair, build_eval_report, write_report_files
from .review.expert import evaluate_expert, filter_domain, load_domain_categories
from .runmeta import RunManifest, verify_run
from .seeds import derive_seed
from .synthgen import ClinicalChart, CorpusConfig, relabel_corpus, run_corpus
from .synthgen.icd import DEFAULT_MIN_SCORE
from .taxonomy import CPT, ICD10CM, load_catalog

_DATA = Path(__file__).parent / "data"

BUNDLED_CATALOGS = {
    ICD10CM: _DATA / "icd10cm_catalog.tsv",
    CPT: _DATA / "cpt_catalog.tsv",
}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3


@click.group(name="medcodeflow")
def cli():
    """Synthetic medical-coding corpora: generate, label, prep, evaluate, review."""


# ----------------------------------------------------------------- plumbing


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(command: str, config: dict) -> RunManifest:
    clean = {k: v for k, v in sorted(config.items()) if v is not None}
    return RunManifest(command=command, config=clean)


def _finish(manifest: RunManifest, out: Path, message: str) -> None:
    path = manifest.write(out)
    click.echo(message)
    click.echo(f"run {manifest.run_id[:12]} manifest {path}")


def _chat_provider(mock: bool, profile: str, script: str | None, model: str):
    if mock:
        return MockChatProvider(script_path=script, profile=profile)
    from .gateway import HttpChatProvider

    return HttpChatProvider(model=model)


def _embedder(mock: bool, model: str, dim: int):
    if mock:
        return TokenHashEmbedder(dim=dim)
    from .embedding import HttpEmbeddingProvider

    return HttpEmbeddingProvider(model=model, dim=dim)


def _resolve_index(index_path, catalog, embedder):
    if index_path:
        index = load_index(index_path)
        index.check_provider(embedder.provider_id)
        return index
    return build_index(catalog, embedder)


def _distribute(total: int, names: list[str]) -> dict[str, int]:
    names = sorted(names)
    if not names:
        raise DataError("no generation groups available (empty pool/specialty list)")
    base, extra = divmod(total, len(names))
    counts = {name: base + (1 if i < extra else 0) for i, name in enumerate(names)}
    return {name: count for name, count in counts.items() if count > 0}


def _load_charts(path) -> list[ClinicalChart]:
    return [ClinicalChart.from_dict(rec) for rec in read_jsonl(path)]


def _assignments(raw: list[dict]) -> tuple[Assignment, ...]:
    return tuple(
        Assignment.make(a["code"], a.get("evidence_lines", ()), a.get("rationale", ""))
        for a in raw
    )


provider_options = [
    click.option("--mock", is_flag=True, help="Use offline deterministic providers."),
    click.option("--profile", default="clean", show_default=True,
                 type=click.Choice(["clean", "noisy"]), help="Mock chat behavior."),
    click.option("--script", default=None, type=click.Path(exists=True),
                 help="Scripted mock responses (JSONL)."),
    click.option("--model", default="gpt-4o-mini", show_default=True,
                 help="Chat model for live runs."),
    click.option("--embed-model", default="text-embedding-3-small", show_default=True,
                 help="Embedding model for live runs."),
    click.option("--dim", default=256, show_default=True, help="Embedding dimension."),
]


def with_provider_options(command):
    for option in reversed(provider_options):
        command = option(command)
    return command


# ------------------------------------------------------------------ catalog


@cli.group()
def catalog():
    """Code catalog inspection."""


@catalog.command("validate")
@click.argument("catalog_path", type=click.Path())
@click.option("--system", default=None, type=click.Choice([ICD10CM, CPT]),
              help="Require this coding system.")
@click.option("--out-dir", default="runs/catalog-validate", show_default=True)
def catalog_validate(catalog_path, system, out_dir):
    """Parse and fully validate a catalog file."""
    cat = load_catalog(catalog_path, system=system)
    out = _out_dir(out_dir)
    summary = {
        "system": cat.system,
        "version": cat.version,
        "codes": len(cat),
        "chapters": len(cat.chapters),
        "blocks": len(cat.blocks),
        "specialties": len(cat.specialty_ranges),
    }
    dump_json(out / "validation.json", summary)
    manifest = _manifest("catalog validate", {"catalog": str(catalog_path), "system": system})
    manifest.add_input(catalog_path)
    manifest.add_output(out / "validation.json")
    _finish(manifest, out, f"{cat.system} {cat.version}: {len(cat)} codes, valid")


# -------------------------------------------------------------------- index


@cli.group()
def index():
    """Embedding index over catalog descriptions."""


@index.command("build")
@click.option("--catalog", "catalog_path", required=True, type=click.Path())
@click.option("--out-dir", default="runs/index", show_default=True)
@with_provider_options
def index_build(catalog_path, out_dir, mock, profile, script, model, embed_model, dim):
    """Embed every catalog entry into a binary index plus a JSONL debug dump."""
    cat = load_catalog(catalog_path)
    embedder = _embedder(mock, embed_model, dim)
    out = _out_dir(out_dir)
    idx = build_index(cat, embedder, progress_path=out / "build_progress.jsonl")
    save_index(idx, out / "index.bin")
    export_index_jsonl(idx, out / "index_debug.jsonl")
    manifest = _manifest("index build", {
        "catalog": str(catalog_path), "provider": embedder.provider_id, "dim": dim,
    })
    manifest.add_input(catalog_path)
    manifest.add_output(out / "index.bin")
    manifest.add_output(out / "index_debug.jsonl")
    _finish(manifest, out, f"indexed {len(idx)} {idx.system} codes with {idx.provider_id}")


# ---------------------------------------------------------------- gen/label


def _run_generation(kind, count, groups, catalog_path, out_dir, seed, gateway_args, knobs):
    mock, profile, script, model, embed_model, dim = gateway_args
    default_catalog = BUNDLED_CATALOGS[ICD10CM if kind == "icd" else CPT]
    cat = load_catalog(catalog_path or default_catalog)
    provider = _chat_provider(mock, profile, script, model)
    embedder = _embedder(mock, embed_model, dim)
    gateway = ChatGateway(provider, GatewayConfig())
    out = _out_dir(out_dir)

    if kind == "icd":
        from .synthgen import load_domain_pools

        pools = load_domain_pools(catalog=cat)
        counts = _distribute(count, groups or list(pools))
        config = CorpusConfig(out_dir=out, icd_counts=counts, seed=seed, **knobs)
        diagnostics = run_corpus(config, cat, gateway, embedder, build_index(cat, embedder))
    else:
        labels = [r.label for r in cat.specialty_ranges]
        counts = _distribute(count, groups or labels)
        config = CorpusConfig(out_dir=out, cpt_counts=counts, seed=seed, **knobs)
        diagnostics = run_corpus(config, cat, gateway, embedder, build_index(cat, embedder))

    manifest = _manifest(f"gen {kind}", {
        "counts": counts, "seed": seed, "provider": provider.provider_id,
        "embedder": embedder.provider_id, **knobs,
    })
    manifest.add_input(catalog_path or default_catalog)
    for name in ("charts.jsonl", "gold.jsonl", "audit.jsonl", "diagnostics.json"):
        if (out / name).exists():
            manifest.add_output(out / name)
    _finish(
        manifest, out,
        f"retained {diagnostics['retained']} of {diagnostics['attempted']} charts "
        f"(discard rate {diagnostics['discard_rate']:.2f})",
    )


gen_options = [
    click.option("--count", default=10, show_default=True, help="Total charts to generate."),
    click.option("--catalog", "catalog_path", default=None, type=click.Path(),
                 help="Catalog file (defaults to the bundled fixture)."),
    click.option("--out-dir", default=None),
    click.option("--seed", default=0, show_default=True),
    click.option("--top-n", default=DEFAULT_TOP_N, show_default=True),
    click.option("--max-n", default=DEFAULT_MAX_N, show_default=True),
    click.option("--min-score", default=DEFAULT_MIN_SCORE, show_default=True),
]


def with_gen_options(command):
    for option in reversed(gen_options):
        command = option(command)
    return command


@cli.group()
def gen():
    """Generate synthetic labeled corpora."""


@gen.command("icd")
@click.option("--domain", "domains", multiple=True,
              help="Domain pool(s) to draw seed codes from; repeatable.")
@with_gen_options
@with_provider_options
def gen_icd(domains, count, catalog_path, out_dir, seed, top_n, max_n, min_score,
            mock, profile, script, model, embed_model, dim):
    """Two-phase diagnosis charts: generate notes, then label with evidence."""
    _run_generation(
        "icd", count, list(domains), catalog_path, out_dir or "runs/gen-icd", seed,
        (mock, profile, script, model, embed_model, dim),
        {"top_n": top_n, "max_n": max_n, "min_score": min_score},
    )


@gen.command("cpt")
@click.option("--specialty", "specialties", multiple=True,
              help="Specialty range(s) to sample from; repeatable.")
@with_gen_options
@with_provider_options
def gen_cpt(specialties, count, catalog_path, out_dir, seed, top_n, max_n, min_score,
            mock, profile, script, model, embed_model, dim):
    """Procedure notes labeled through description resolution."""
    _run_generation(
        "cpt", count, list(specialties), catalog_path, out_dir or "runs/gen-cpt", seed,
        (mock, profile, script, model, embed_model, dim),
        {"top_n": top_n, "max_n": max_n, "min_score": min_score},
    )


def _run_labeling(kind, corpus, catalog_path, index_path, out_dir, knobs, gateway_args):
    mock, profile, script, model, embed_model, dim = gateway_args
    default_catalog = BUNDLED_CATALOGS[ICD10CM if kind == "icd" else CPT]
    cat = load_catalog(catalog_path or default_catalog)
    provider = _chat_provider(mock, profile, script, model)
    embedder = _embedder(mock, embed_model, dim)
    idx = _resolve_index(index_path, cat, embedder)
    charts = _load_charts(corpus)
    out = _out_dir(out_dir)

    from .synthgen import AuditLog

    audit = AuditLog(path=out / "audit.jsonl")
    result = relabel_corpus(
        charts, idx, embedder, ChatGateway(provider, GatewayConfig()),
        out / "predictions.jsonl", audit=audit, **knobs,
    )
    manifest = _manifest(f"label {kind}", {
        "corpus": str(corpus), "provider": provider.provider_id,
        "embedder": embedder.provider_id, **knobs,
    })
    manifest.add_input(corpus)
    manifest.add_input(catalog_path or default_catalog)
    manifest.add_output(out / "predictions.jsonl")
    _finish(
        manifest, out,
        f"labeled {result['charts']} charts ({result['discarded']} discarded)",
    )


@cli.group()
def label():
    """Re-label existing charts (prediction runs)."""


@label.command("icd")
@click.option("--corpus", required=True, type=click.Path())
@click.option("--catalog", "catalog_path", default=None, type=click.Path())
@click.option("--index", "index_path", default=None, type=click.Path())
@click.option("--out-dir", default="runs/label-icd", show_default=True)
@click.option("--top-n", default=DEFAULT_TOP_N, show_default=True)
@click.option("--min-score", default=DEFAULT_MIN_SCORE, show_default=True)
@with_provider_options
def label_icd(corpus, catalog_path, index_path, out_dir, top_n, min_score,
              mock, profile, script, model, embed_model, dim):
    """Retrieval-constrained diagnosis labeling with line evidence."""
    _run_labeling(
        "icd", corpus, catalog_path, index_path, out_dir,
        {"top_n": top_n, "min_score": min_score},
        (mock, profile, script, model, embed_model, dim),
    )


@label.command("cpt")
@click.option("--corpus", required=True, type=click.Path())
@click.option("--catalog", "catalog_path", default=None, type=click.Path())
@click.option("--index", "index_path", default=None, type=click.Path())
@click.option("--out-dir", default="runs/label-cpt", show_default=True)
@click.option("--top-n", default=DEFAULT_TOP_N, show_default=True)
@click.option("--max-n", default=DEFAULT_MAX_N, show_default=True)
@click.option("--min-score", default=DEFAULT_MIN_SCORE, show_default=True)
@with_provider_options
def label_cpt(corpus, catalog_path, index_path, out_dir, top_n, max_n, min_score,
              mock, profile, script, model, embed_model, dim):
    """Description-resolution procedure labeling."""
    _run_labeling(
        "cpt", corpus, catalog_path, index_path, out_dir,
        {"top_n": top_n, "max_n": max_n, "min_score": min_score},
        (mock, profile, script, model, embed_model, dim),
    )


# --------------------------------------------------------------------- prep


@cli.command()
@click.option("--corpus", required=True, type=click.Path())
@click.option("--gold", required=True, type=click.Path())
@click.option("--out-dir", default="runs/prep", show_default=True)
@click.option("--system", default=ICD10CM, show_default=True,
              type=click.Choice([ICD10CM, CPT]))
@click.option("--seed", default=0, show_default=True,
              help="Root seed; split and augmentation derive their own.")
@click.option("--split-seed", default=None, type=int,
              help="Override the derived split seed.")
@click.option("--dedupe-threshold", default=0.85, show_default=True)
@click.option("--augment-fraction", default=0.30, show_default=True)
@click.option("--max-len", default=8192, show_default=True)
@click.option("--template-version", default="v1", show_default=True)
def prep(corpus, gold, out_dir, system, seed, split_seed, dedupe_threshold,
         augment_fraction, max_len, template_version):
    """Dedupe, split 95/5, augment, render, and pack training data."""
    from .prep import (
        LabeledNote,
        WhitespaceTokenizer,
        augment,
        dedupe,
        load_template_pack,
        pack_samples,
        packing_efficiency,
        render_prompt,
        split_corpus,
    )

    charts = _load_charts(corpus)
    gold_of = {rec["chart_id"]: rec["assignments"] for rec in read_jsonl(gold)}
    out = _out_dir(out_dir)

    kept = dedupe(charts, threshold=dedupe_threshold)
    manifest_split = split_corpus(
        kept.kept,
        split_seed if split_seed is not None else derive_seed(seed, "split") % 2**31,
        manifest_path=out / "manifest.json",
    )

    notes = {
        chart.chart_id: LabeledNote.make(
            chart.chart_id, chart.lines, _assignments(gold_of.get(chart.chart_id, []))
        )
        for chart in kept.kept
    }
    train_notes = [notes[cid] for cid in manifest_split.train_ids]
    eval_notes = [notes[cid] for cid in manifest_split.eval_ids]

    tokenizer = WhitespaceTokenizer()
    pack_templates = load_template_pack(system, version=template_version)

    def rendered_tokens(note):
        return render_prompt(note, pack_templates, tokenizer).token_count

    augmented = augment(
        train_notes, fraction=augment_fraction,
        seed=derive_seed(seed, "augment") % 2**31,
        max_len=max_len, token_count_of=rendered_tokens,
    )
    samples = [render_prompt(n, pack_templates, tokenizer) for n in augmented.notes]
    sequences = pack_samples(samples, tokenizer, max_len=max_len)

    write_jsonl(out / "train.packed.jsonl", [seq.to_dict() for seq in sequences])
    write_jsonl(out / "train_samples.jsonl", [s.to_dict() for s in samples])
    write_jsonl(
        out / "eval.jsonl",
        [
            {
                "chart_id": n.chart_id,
                "lines": list(n.lines),
                "assignments": [
                    {"code": a.code, "evidence_lines": sorted(a.evidence_lines),
                     "rationale": a.rationale}
                    for a in n.assignments
                ],
            }
            for n in eval_notes
        ],
    )
    efficiency = packing_efficiency(sequences, max_len=max_len)
    dump_json(out / "prep_log.json", {
        "input_charts": len(charts),
        "dedupe_removed": kept.removed,
        "train": len(manifest_split.train_ids),
        "eval": len(manifest_split.eval_ids),
        "composites": len(augmented.composites),
        "consumed_originals": len(augmented.consumed_ids),
        "underfilled": augmented.underfilled,
        "samples": len(samples),
        "packed_sequences": len(sequences),
        "packing_efficiency": efficiency,
    })

    manifest = _manifest("prep", {
        "corpus": str(corpus), "gold": str(gold), "system": system, "seed": seed,
        "dedupe_threshold": dedupe_threshold, "augment_fraction": augment_fraction,
        "max_len": max_len, "template_version": template_version,
    })
    manifest.add_input(corpus)
    manifest.add_input(gold)
    for name in ("train.packed.jsonl", "train_samples.jsonl", "eval.jsonl",
                 "manifest.json", "prep_log.json"):
        manifest.add_output(out / name)
    _finish(
        manifest, out,
        f"{len(manifest_split.train_ids)} train / {len(manifest_split.eval_ids)} eval, "
        f"{len(sequences)} packed sequences, efficiency {efficiency:.2f}",
    )


# ----------------------------------------------------------------- evaluate


def _parse_levels(spec: str) -> list[int]:
    spec = spec.strip()
    if "-" in spec:
        lo, hi = spec.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in spec.split(",") if part]


@cli.command()
@click.option("--gold", required=True, type=click.Path())
@click.option("--pred", required=True, type=click.Path())
@click.option("--catalog", "catalog_path", default=None, type=click.Path())
@click.option("--corpus", default=None, type=click.Path(),
              help="Chart file supplying per-chart domain tags.")
@click.option("--levels", default="0-4", show_default=True)
@click.option("--system", default=ICD10CM, show_default=True,
              type=click.Choice([ICD10CM, CPT]))
@click.option("--train-counts", default=None, type=click.Path(),
              help="JSON map of code/category to training count.")
@click.option("--min-cases", default=10, show_default=True)
@click.option("--out-dir", default="runs/evaluate", show_default=True)
def evaluate(gold, pred, catalog_path, corpus, levels, system, train_counts,
             min_cases, out_dir):
    """Score predictions against gold labels and write the report files."""
    if not Path(gold).exists():
        raise DataError(f"gold file not found: {gold}")
    if not Path(pred).exists():
        raise DataError(f"prediction file not found: {pred}")
    requested = _parse_levels(levels)

    gold_records = list(read_jsonl(gold))
    preds_of = {rec["chart_id"]: rec["assignments"] for rec in read_jsonl(pred)}
    pairs = [
        DocPair(
            chart_id=rec["chart_id"],
            pred=_assignments(preds_of.get(rec["chart_id"], [])),
            gold=_assignments(rec["assignments"]),
        )
        for rec in gold_records
    ]
    cat = load_catalog(catalog_path) if catalog_path else None
    domains = None
    if corpus:
        domains = {
            rec["chart_id"]: (rec.get("domain_tags") or ["General"])[0]
            for rec in read_jsonl(corpus)
        }
    counts = load_json(train_counts) if train_counts else None

    manifest = _manifest("evaluate", {
        "gold": str(gold), "pred": str(pred), "system": system,
        "levels": levels, "min_cases": min_cases,
    })
    report = build_eval_report(
        system, pairs, catalog=cat, domains=domains, train_counts=counts,
        run={"run_id": manifest.run_id}, min_cases=min_cases,
    )
    report["levels"] = {
        key: value
        for key, value in report["levels"].items()
        if not key.isdigit() or int(key) in requested
    }
    out = _out_dir(out_dir)
    paths = write_report_files(report, out)

    manifest.add_input(gold)
    manifest.add_input(pred)
    for path in paths.values():
        manifest.add_output(path)
    headline = report["levels"].get(report["headline_level"])
    line = f"{len(pairs)} charts"
    if headline:
        line += f", macro F1 {headline['macro']['f1']:.3f} at level {report['headline_level']}"
    _finish(manifest, out, line)


# ------------------------------------------------------------------ analyze


@cli.group()
def analyze():
    """Post-hoc analyses over an existing report.json."""


def _report_rows(report_path) -> tuple[dict, list]:
    from .metrics import CodeRow

    report = load_json(report_path)
    raw = report.get("per_category") or report["per_code"]
    return report, [CodeRow(**row) for row in raw]


@analyze.command("freq")
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--train-counts", required=True, type=click.Path())
@click.option("--out-dir", default="runs/analyze-freq", show_default=True)
def analyze_freq(report_path, train_counts, out_dir):
    """Bucket per-code F1 by training-set frequency."""
    import csv

    from .metrics import frequency_analysis

    _, rows = _report_rows(report_path)
    freq = frequency_analysis(rows, load_json(train_counts))
    out = _out_dir(out_dir)
    with (out / "freq.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "train_count", "f1", "bin_low", "bin_high"])
        for row in freq["rows"]:
            writer.writerow([row.key, row.train_count, row.f1, row.bin_low, row.bin_high])
    dump_json(out / "freq_bins.json", freq["bins"])
    manifest = _manifest("analyze freq", {
        "report": str(report_path), "train_counts": str(train_counts),
    })
    manifest.add_input(report_path)
    manifest.add_input(train_counts)
    manifest.add_output(out / "freq.csv")
    manifest.add_output(out / "freq_bins.json")
    _finish(manifest, out, f"{len(freq['rows'])} keys across {len(freq['bins'])} bins")


@analyze.command("outliers")
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--min-cases", default=10, show_default=True)
@click.option("--out-dir", default="runs/analyze-outliers", show_default=True)
def analyze_outliers(report_path, min_cases, out_dir):
    """Flag code groups whose F1 falls below Q1 - 1.5 IQR."""
    import csv

    from .metrics import iqr_outliers

    _, rows = _report_rows(report_path)
    result = iqr_outliers(rows, min_cases=min_cases)
    out = _out_dir(out_dir)
    flagged_keys = {row.key for row in result.flagged}
    with (out / "outliers.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "n_cases", "f1", "flagged"])
        for row in result.eligible:
            writer.writerow([row.key, row.n_cases, row.f1, row.key in flagged_keys])
    manifest = _manifest("analyze outliers", {
        "report": str(report_path), "min_cases": min_cases,
    })
    manifest.add_input(report_path)
    manifest.add_output(out / "outliers.csv")
    for row in result.flagged:
        click.echo(f"flagged {row.key}: f1 {row.f1:.3f} below {result.lower_bound:.4f}")
    _finish(manifest, out, f"{len(result.flagged)} flagged of {result.eligible_count} eligible")


# --------------------------------------------------------------- expert-eval


@cli.command("expert-eval")
@click.option("--pred", required=True, type=click.Path())
@click.option("--expert", required=True, type=click.Path(),
              help="Expert ground truth (expert_gold.jsonl).")
@click.option("--domains", "domains_path", default=None, type=click.Path(),
              help="Domain category ranges JSON (defaults to bundled).")
@click.option("--no-filter", is_flag=True, help="Skip the domain filter.")
@click.option("--out-dir", default="runs/expert-eval", show_default=True)
def expert_eval(pred, expert, domains_path, no_filter, out_dir):
    """Score predictions against expert-accepted labels at levels 0-3."""
    pred_records = list(read_jsonl(pred))
    expert_records = list(read_jsonl(expert))
    filter_summary = None
    if not no_filter:
        domain_sets = (
            load_domain_categories(domains_path) if domains_path
            else load_domain_categories()
        )
        pred_records, filter_summary = filter_domain(pred_records, domain_sets)
    report = evaluate_expert(pred_records, expert_records)
    report["domain_filter"] = filter_summary
    out = _out_dir(out_dir)
    dump_json(out / "expert_report.json", report)
    manifest = _manifest("expert-eval", {
        "pred": str(pred), "expert": str(expert),
        "filtered": not no_filter,
    })
    manifest.add_input(pred)
    manifest.add_input(expert)
    manifest.add_output(out / "expert_report.json")
    for level, metrics in sorted(report["levels"].items()):
        click.echo(
            f"level {level}: "
            + "  ".join(
                f"{name} {metrics[name]['mean']:.4f}({metrics[name]['sem']:.4f})"
                for name in ("precision", "recall", "f1")
            )
        )
    _finish(manifest, out, f"evaluated {report['n_charts']} reviewed charts")


# -------------------------------------------------------------- serve-review


@cli.command("serve-review")
@click.option("--port", default=8642, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--corpus", required=True, type=click.Path())
@click.option("--gold", required=True, type=click.Path())
@click.option("--store", required=True, type=click.Path())
@click.option("--catalog", "catalog_path", default=None, type=click.Path())
@click.option("--static-dir", default=None, type=click.Path())
@click.option("--token", default=None, help="Shared token required in X-Review-Token.")
@click.option("--export-path", default=None, type=click.Path())
def serve_review(port, host, corpus, gold, store, catalog_path, static_dir,
                 token, export_path):
    """Serve the expert review API (and UI bundle when --static-dir is set)."""
    import uvicorn

    from .review.service import create_app

    app = create_app(
        corpus, gold, store,
        catalog_path=catalog_path, static_dir=static_dir,
        token=token, export_path=export_path or str(Path(store).parent / "expert_gold.jsonl"),
    )
    out = _out_dir(Path(store).parent)
    manifest = _manifest("serve-review", {
        "corpus": str(corpus), "gold": str(gold), "store": str(store), "port": port,
    })
    manifest.add_input(corpus)
    manifest.add_input(gold)
    manifest.write(out)
    click.echo(f"review service on http://{host}:{port} (store {store})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


# --------------------------------------------------------------- verify-run


@cli.command("verify-run")
@click.argument("manifest_path", type=click.Path())
def verify_run_cmd(manifest_path):
    """Re-hash a run's inputs and outputs against its manifest."""
    counts = verify_run(manifest_path)
    click.echo(
        f"ok: {counts['inputs']} inputs and {counts['outputs']} outputs unchanged"
    )


# --------------------------------------------------------------------- main


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="medcodeflow", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except FileNotFoundError as exc:
        click.echo(f"error: missing file: {exc.filename or exc}", err=True)
        return EXIT_DATA
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except ProviderError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_PROVIDER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
