"""Release acceptance suite.

Each test covers one release criterion and prints a single
[PASS]/[FAIL] line so the whole gate can be read off the -s output.
Expected values are frozen here, independently of the implementation:
the matching oracle is a maximum-bipartite-matching enumeration, the
aggregation targets are hand-checked weighted means, and the fixture
quantiles are worked out by hand in the comments.
"""

import math
import shutil
import time
from contextlib import contextmanager
from pathlib import Path
from random import Random
from types import SimpleNamespace

import numpy as np
import pytest

from medcodeflow.cli import main
from medcodeflow.codeindex import CodeIndex, fallback_expand, query_top_n
from medcodeflow.errors import ManifestConflict
from medcodeflow.hashing import file_sha256
from medcodeflow.jsonl import load_json
from medcodeflow.metrics.aggregate import (
    CodeRow,
    GroupStats,
    aggregate_corpus,
    weighted_domain_aggregate,
)
from medcodeflow.metrics.matching import Assignment, DocPair, evaluate_document
from medcodeflow.metrics.outliers import iqr_outliers
from medcodeflow.prep.augment import LabeledNote, augment
from medcodeflow.prep.dedupe import dedupe, shingle_jaccard, shingles
from medcodeflow.prep.packing import MAX_LEN, pack, packing_efficiency, unpack
from medcodeflow.prep.split import split_corpus
from medcodeflow.review.expert import (
    evaluate_expert,
    filter_domain,
    load_domain_categories,
    mean_sem,
)
from medcodeflow.taxonomy import ICD10CM

EVAL_REPORT_SCHEMA = "medcodeflow/eval-report/v1"
EXPERT_REPORT_SCHEMA = "medcodeflow/expert-eval/v1"


@contextmanager
def criterion(name):
    """Print one gate line per criterion; failures re-raise."""
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name} ({time.perf_counter() - started:.2f}s)")


# --- case-weighted domain aggregation -------------------------------

# Frozen per-domain rows and their case-weighted combinations. The
# combined means are hand-checked: e.g. combined precision
# (0.9008*896 + 0.8727*2128 + 0.7716*1176) / 4200 = 0.850386.
DOMAIN_ROWS = [
    GroupStats("Advanced Illness", 896, 0.9008, 0.8380, 0.8630, 0.1008, 0.1184, 0.1039),
    GroupStats("Frailty", 2128, 0.8727, 0.8749, 0.8727, 0.1086, 0.1303, 0.1173),
    GroupStats("SDoH", 1176, 0.7716, 0.7640, 0.7668, 0.1391, 0.1578, 0.1491),
]

COMBINED_EXPECTED = {
    "Combined": (4200, 0.8504, 0.8360, 0.8410, 0.1268, 0.1441, 0.1329),
    "Combined w/o SDoH": (3024, 0.8810, 0.8639, 0.8698, 0.1071, 0.1280, 0.1136),
}


def test_domain_aggregation_combined_rows():
    with criterion("case-weighted aggregation reproduces frozen combined rows"):
        started = time.perf_counter()
        combined = weighted_domain_aggregate(DOMAIN_ROWS, name="Combined")
        without_sdoh = weighted_domain_aggregate(
            DOMAIN_ROWS[:2], name="Combined w/o SDoH"
        )
        for stats in (combined, without_sdoh):
            n, p, r, f1, p_std, r_std, f1_std = COMBINED_EXPECTED[stats.name]
            assert stats.n_cases == n
            assert stats.precision == pytest.approx(p, abs=5e-4)
            assert stats.recall == pytest.approx(r, abs=5e-4)
            assert stats.f1 == pytest.approx(f1, abs=5e-4)
            assert stats.precision_std == pytest.approx(p_std, abs=5e-4)
            assert stats.recall_std == pytest.approx(r_std, abs=5e-4)
            assert stats.f1_std == pytest.approx(f1_std, abs=5e-4)
        assert time.perf_counter() - started < 1.0


# --- frozen full-scale report fixtures ------------------------------

# Scores from the full-scale fine-tuned run. They need a trained 70B
# model to regenerate, so the release pins them as schema-conformant
# fixtures; the metric engine itself is covered property-based below.
FULL_SCALE_REPORTS = [
    {
        "schema": EVAL_REPORT_SCHEMA,
        "system": "ICD10CM",
        "variant": "fine-tuned",
        "levels": {
            "0": {"macro": {"f1": 0.864}},
            "3": {"macro": {"f1": 0.704}},
            "4": {"macro": {"f1": 0.629}},
        },
    },
    {
        "schema": EVAL_REPORT_SCHEMA,
        "system": "ICD10CM",
        "variant": "base-model",
        "levels": {"3": {"macro": {"f1": 0.180}}},
    },
    {
        "schema": EVAL_REPORT_SCHEMA,
        "system": "CPT",
        "variant": "fine-tuned",
        "levels": {"exact": {"macro": {"f1": 0.736}}},
    },
    {
        "schema": EVAL_REPORT_SCHEMA,
        "system": "CPT",
        "variant": "base-model",
        "levels": {"exact": {"macro": {"f1": 0.193}}},
    },
]

EXPERT_REFERENCE_REPORT = {
    "schema": EXPERT_REPORT_SCHEMA,
    "n_charts": 100,
    "levels": {
        "0": {
            "precision": {"mean": 0.3963, "sem": 0.0172},
            "recall": {"mean": 0.9301, "sem": 0.0160},
            "f1": {"mean": 0.5365, "sem": 0.0168},
        },
        "1": {
            "precision": {"mean": 0.3309, "sem": 0.0178},
            "recall": {"mean": 0.8820, "sem": 0.0199},
            "f1": {"mean": 0.4618, "sem": 0.0185},
        },
        "2": {
            "precision": {"mean": 0.3157, "sem": 0.0178},
            "recall": {"mean": 0.8621, "sem": 0.0208},
            "f1": {"mean": 0.4422, "sem": 0.0185},
        },
        "3": {
            "precision": {"mean": 0.3153, "sem": 0.0178},
            "recall": {"mean": 0.8621, "sem": 0.0208},
            "f1": {"mean": 0.4416, "sem": 0.0186},
        },
    },
}


def check_report_nesting(report, full=False):
    """Structural schema check shared by fixtures and generated reports.

    Fixtures carry only the published fields; reports written by the
    pipeline (`full=True`) must carry the complete table set.
    """
    assert report["schema"] == EVAL_REPORT_SCHEMA
    assert report["system"] in ("ICD10CM", "CPT")
    assert isinstance(report["levels"], dict) and report["levels"]
    for entry in report["levels"].values():
        for section in ("macro", "micro") if full else ("macro",):
            scores = entry[section]
            for metric in ("precision", "recall", "f1") if full else ("f1",):
                assert 0.0 <= scores[metric] <= 1.0
        if full:
            assert all(
                isinstance(v, int) and v >= 0 for v in entry["counts"].values()
            )
    if full:
        assert isinstance(report["doc_count"], int) and report["doc_count"] >= 0
        assert isinstance(report["headline_level"], str)
        assert 0.0 <= report["response_quality"] <= 1.0
        assert isinstance(report["per_code"], list)
        assert isinstance(report["outliers"], dict)


def check_expert_nesting(report):
    assert report["schema"] == EXPERT_REPORT_SCHEMA
    assert isinstance(report["n_charts"], int) and report["n_charts"] >= 0
    assert set(report["levels"]) == {"0", "1", "2", "3"}
    for entry in report["levels"].values():
        for metric in ("precision", "recall", "f1"):
            assert 0.0 <= entry[metric]["mean"] <= 1.0
            assert entry[metric]["sem"] >= 0.0


def test_full_scale_report_fixtures():
    with criterion("frozen full-scale score fixtures conform to the report schemas"):
        for fixture in FULL_SCALE_REPORTS:
            check_report_nesting(fixture)
        check_expert_nesting(EXPERT_REFERENCE_REPORT)
        tuned = {
            (f["system"], level): f["levels"][level]["macro"]["f1"]
            for f in FULL_SCALE_REPORTS
            if f["variant"] == "fine-tuned"
            for level in f["levels"]
        }
        base = {
            f["system"]: next(iter(f["levels"].values()))["macro"]["f1"]
            for f in FULL_SCALE_REPORTS
            if f["variant"] == "base-model"
        }
        assert tuned[("ICD10CM", "3")] == 0.704
        assert tuned[("ICD10CM", "0")] == 0.864
        assert tuned[("ICD10CM", "4")] == 0.629
        assert tuned[("CPT", "exact")] == 0.736
        assert base == {"ICD10CM": 0.180, "CPT": 0.193}


# --- brute-force matching oracle ------------------------------------

PREFIX_LEN = {0: 3, 1: 4, 2: 5}


def oracle_normalize(code):
    return code.replace(".", "").upper()


def oracle_prefix(code, level):
    return code if level == 3 else code[: PREFIX_LEN[level]]


def oracle_dedupe(assignments):
    """First-seen dedup on the normalized code, evidence unioned."""
    merged = {}
    order = []
    for item in assignments:
        code = oracle_normalize(item.code)
        if code not in merged:
            merged[code] = set()
            order.append(code)
        merged[code] |= set(item.evidence_lines)
    return [(code, frozenset(merged[code])) for code in order]


def max_matching(pred_items, gold_items, agree):
    """Size of the largest one-to-one pairing via augmenting paths."""
    partner_of = {}

    def assign(i, seen):
        for j, gold in enumerate(gold_items):
            if j in seen or not agree(pred_items[i], gold):
                continue
            seen.add(j)
            if j not in partner_of or assign(partner_of[j], seen):
                partner_of[j] = i
                return True
        return False

    return sum(assign(i, set()) for i in range(len(pred_items)))


def oracle_prf(tp, pred_count, gold_count):
    if pred_count == 0:
        precision = 1.0 if gold_count == 0 else 0.0
    else:
        precision = tp / pred_count
    recall = 1.0 if gold_count == 0 else tp / gold_count
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def random_assignment(rng):
    category = rng.choice(["E11", "I10", "Z59", "M81", "R53"])
    suffix = "".join(rng.choice("019") for _ in range(rng.randint(0, 3)))
    code = category + suffix
    if suffix and rng.random() < 0.5:
        code = f"{category}.{suffix}"
    evidence = frozenset(rng.sample(range(5), rng.randint(0, 3)))
    return Assignment.make(code, evidence_lines=evidence)


@pytest.fixture(scope="module")
def random_documents():
    rng = Random(4242)
    return [
        DocPair(
            chart_id=f"doc-{i:04d}",
            pred=tuple(random_assignment(rng) for _ in range(rng.randint(0, 8))),
            gold=tuple(random_assignment(rng) for _ in range(rng.randint(0, 8))),
        )
        for i in range(1000)
    ]


def test_matching_oracle(random_documents):
    with criterion("match counts agree with the brute-force oracle on 1000 documents"):
        started = time.perf_counter()
        for pair in random_documents:
            doc = evaluate_document(pair)
            pred_d = oracle_dedupe(pair.pred)
            gold_d = oracle_dedupe(pair.gold)
            for level in (0, 1, 2, 3):
                def agree(a, b, level=level):
                    return oracle_prefix(a[0], level) == oracle_prefix(b[0], level)

                tp = max_matching(pred_d, gold_d, agree)
                counts = doc.levels[str(level)]
                assert counts.true_pos == tp
                assert counts.pred_count == len(pred_d)
                assert counts.gold_count == len(gold_d)
                assert doc.scores[str(level)] == oracle_prf(tp, len(pred_d), len(gold_d))
            tp4 = max_matching(
                pred_d, gold_d, lambda a, b: a[0] == b[0] and bool(a[1] & b[1])
            )
            counts = doc.levels["4"]
            assert counts.true_pos == tp4
            assert doc.scores["4"] == oracle_prf(tp4, len(pred_d), len(gold_d))
        assert time.perf_counter() - started < 30.0


def test_level_monotonicity(random_documents):
    with criterion("true positives and macro F1 are non-increasing in level"):
        doc_evals = [evaluate_document(pair) for pair in random_documents]
        for doc in doc_evals:
            tps = [doc.levels[str(level)].true_pos for level in range(5)]
            assert all(a >= b for a, b in zip(tps, tps[1:]))
        for start in range(0, len(doc_evals), 50):
            corpus = aggregate_corpus(doc_evals[start : start + 50])
            f1s = [corpus[str(level)]["macro"]["f1"] for level in range(5)]
            assert all(a >= b - 1e-12 for a, b in zip(f1s, f1s[1:]))


# --- sequence packing ------------------------------------------------

def test_packing_contract():
    with criterion("packing respects the budget, inverts exactly, and stays efficient"):
        started = time.perf_counter()
        rng = Random(777)
        position_runs = {}
        used_total = 0
        sequence_total = 0
        for list_no in range(500):
            samples = []
            for k in range(rng.randint(30, 50)):
                length = rng.randint(200, 2000)
                samples.append((f"l{list_no}-s{k}", [t % 251 for t in range(length)]))
            sequences = pack(samples, max_len=MAX_LEN)
            recovered = {}
            for seq in sequences:
                assert len(seq.token_ids) <= MAX_LEN
                for segment in seq.segments:
                    run = position_runs.setdefault(
                        segment.end - segment.start,
                        list(range(segment.end - segment.start)),
                    )
                    assert list(seq.position_ids[segment.start : segment.end]) == run
                for sample_id, token_ids in unpack(seq):
                    assert sample_id not in recovered
                    recovered[sample_id] = token_ids
            assert recovered == dict(samples)
            used_total += packing_efficiency(sequences) * len(sequences)
            sequence_total += len(sequences)
        assert used_total / sequence_total >= 0.80
        assert time.perf_counter() - started < 10.0


# --- augmentation evidence integrity ---------------------------------

CODE_POOL = ["E11.9", "I10", "Z59.0", "M81.0", "N18.3", "R53.1", "I50.9", "Z66"]


def labeled_corpus(corpus_no, rng, size):
    notes = []
    for i in range(size):
        chart_id = f"note-{corpus_no:02d}-{i:03d}"
        lines = tuple(
            f"{chart_id} line {j} detail {rng.randrange(10**9)}"
            for j in range(rng.randint(3, 8))
        )
        assignments = tuple(
            Assignment.make(
                code,
                evidence_lines=frozenset(
                    rng.sample(range(len(lines)), rng.randint(1, 3))
                ),
                rationale="documented",
            )
            for code in rng.sample(CODE_POOL, rng.randint(1, 3))
        )
        notes.append(LabeledNote.make(chart_id, lines, assignments))
    return notes


def referenced_texts(note):
    """Map normalized code -> set of line texts its evidence points at."""
    out = {}
    for item in note.assignments:
        key = oracle_normalize(item.code)
        out.setdefault(key, set()).update(note.lines[i] for i in item.evidence_lines)
    return out


def test_augmentation_evidence_integrity():
    with criterion("composite evidence dereferences to original lines, 30% accounting"):
        rng = Random(90125)
        pairs_checked = 0
        for corpus_no in range(25):
            size = rng.randint(55, 75)
            notes = labeled_corpus(corpus_no, rng, size)
            by_id = {note.chart_id: note for note in notes}
            result = augment(notes, fraction=0.30, seed=corpus_no)

            target = math.floor(size * 0.30 / 2)
            assert result.target_pairs == target
            assert not result.underfilled
            assert len(result.composites) == target
            assert len(result.consumed_ids) == 2 * target
            assert len(result.notes) == size - target
            kept_ids = {note.chart_id for note in result.notes}
            composite_ids = {c.chart_id for c in result.composites}
            assert kept_ids == (set(by_id) - set(result.consumed_ids)) | composite_ids

            for composite in result.composites:
                first, second = (by_id[cid] for cid in composite.origin_chart_ids)
                assert composite.lines == first.lines + second.lines
                expected = referenced_texts(first)
                for key, texts in referenced_texts(second).items():
                    expected.setdefault(key, set()).update(texts)
                actual = referenced_texts(composite)
                assert actual == expected
                pairs_checked += 1
        assert pairs_checked >= 200


# --- retrieval exactness ---------------------------------------------

def test_retrieval_exactness():
    with criterion("top-n retrieval matches brute-force cosine ranking with ties"):
        rng = np.random.default_rng(20260813)
        for _ in range(100):
            size = int(rng.integers(2, 1001))
            dim = int(rng.integers(4, 17))
            vectors = rng.standard_normal((size, dim))
            anchor = int(rng.integers(0, size))
            twin = int(rng.integers(0, size))
            if twin == anchor:
                twin = (anchor + 1) % size
            vectors[twin] = vectors[anchor]
            vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
            index = CodeIndex(
                system=ICD10CM,
                dim=dim,
                provider_id="acceptance",
                codes=[f"C{k:04d}" for k in range(size)],
                descriptions=[f"item {k}" for k in range(size)],
                vectors=vectors.astype(np.float32),
            )
            query = np.array(index.vectors[anchor], dtype=np.float64)
            n = int(rng.integers(2, 21))

            stored = index.vectors.astype(np.float64)
            scores = [float(np.dot(stored[i], query)) for i in range(size)]
            order = sorted(range(size), key=lambda i: (-scores[i], index.codes[i]))
            expected = [(index.codes[i], scores[i]) for i in order[:n]]

            result = query_top_n(index, query, n)
            assert [code for code, _ in result.candidates] == [c for c, _ in expected]
            for (_, got), (_, want) in zip(result.candidates, expected):
                assert got == pytest.approx(want, abs=1e-9)
            # The anchor and its planted twin tie exactly and must occupy
            # the first two ranks in code order.
            top_two = result.candidates[:2]
            assert [code for code, _ in top_two] == sorted(
                [index.codes[anchor], index.codes[twin]]
            )
            assert top_two[0][1] == top_two[1][1]


def test_fallback_expansion_scripted():
    with criterion("fallback expansion returns the first acceptable candidate"):
        size = 60
        angles = np.linspace(0.1, 1.4, size)
        vectors = np.stack(
            [np.cos(angles), np.sin(angles), np.zeros(size)], axis=1
        ).astype(np.float32)
        index = CodeIndex(
            system=ICD10CM,
            dim=3,
            provider_id="acceptance",
            codes=[f"R{k:02d}" for k in range(size)],
            descriptions=[f"item {k}" for k in range(size)],
            vectors=vectors,
        )
        query = np.array([1.0, 0.0, 0.0])

        deep = fallback_expand(index, query, n=5, max_n=50, accept=lambda c, s: c == "R23")
        assert [code for code, _ in deep.candidates] == ["R23"]
        assert deep.expanded and deep.n_requested == 5

        immediate = fallback_expand(index, query, n=5, max_n=50, accept=lambda c, s: c == "R00")
        assert [code for code, _ in immediate.candidates] == ["R00"]
        assert not immediate.expanded

        nothing = fallback_expand(index, query, n=5, max_n=50, accept=lambda c, s: False)
        assert nothing.candidates == [] and nothing.expanded

        everything = fallback_expand(index, query, n=5, max_n=50)
        assert everything.candidates == query_top_n(index, query, 5).candidates
        assert not everything.expanded


# --- end-to-end offline smoke ----------------------------------------

def run_offline_pipeline(base: Path):
    gen_dir, label_dir, prep_dir, eval_dir = (
        base / "gen", base / "label", base / "prep", base / "eval",
    )
    steps = [
        ["gen", "icd", "--mock", "--count", "20", "--seed", "11",
         "--out-dir", str(gen_dir)],
        ["label", "icd", "--mock", "--profile", "noisy",
         "--corpus", str(gen_dir / "charts.jsonl"), "--out-dir", str(label_dir)],
        ["prep", "--corpus", str(gen_dir / "charts.jsonl"),
         "--gold", str(gen_dir / "gold.jsonl"), "--seed", "11",
         "--out-dir", str(prep_dir)],
        ["evaluate", "--gold", str(gen_dir / "gold.jsonl"),
         "--pred", str(label_dir / "predictions.jsonl"),
         "--corpus", str(gen_dir / "charts.jsonl"), "--system", ICD10CM,
         "--out-dir", str(eval_dir)],
    ]
    for argv in steps:
        assert main(argv) == 0, f"step failed: {' '.join(argv)}"
    return {
        str(path.relative_to(base)): file_sha256(path)
        for path in sorted(base.rglob("*"))
        if path.is_file()
    }


def test_offline_pipeline_smoke(tmp_path):
    with criterion("offline pipeline smoke: schema-valid, non-degenerate, rerun-identical"):
        started = time.perf_counter()
        base = tmp_path / "smoke"
        first = run_offline_pipeline(base)

        report = load_json(base / "eval" / "report.json")
        check_report_nesting(report, full=True)
        assert report["doc_count"] == 20
        headline = report["levels"]["3"]["macro"]["f1"]
        assert 0.0 < headline < 1.0

        shutil.rmtree(base)
        second = run_offline_pipeline(base)
        assert first == second
        assert time.perf_counter() - started < 60.0


# --- split and dedupe -------------------------------------------------

def chart(chart_id, lines):
    return SimpleNamespace(chart_id=chart_id, lines=tuple(lines))


def noise_line(tag, i):
    rng = Random(f"{tag}-{i}")
    return " ".join(
        "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(7))
        for _ in range(8)
    )


def split_fixture():
    return [
        chart(f"c{i:03d}", [f"chart {i} line {j} finding {i * 31 + j}" for j in range(4)])
        for i in range(100)
    ]


def test_split_dedupe_contract(tmp_path):
    with criterion("split manifest determinism and guard; dedupe threshold behavior"):
        charts = split_fixture()
        manifest_path = tmp_path / "split.json"
        first = split_corpus(charts, seed=7, manifest_path=manifest_path)
        assert len(first.train_ids) == 95 and len(first.eval_ids) == 5
        assert set(first.train_ids).isdisjoint(first.eval_ids)
        assert set(first.train_ids) | set(first.eval_ids) == {c.chart_id for c in charts}

        stored = split_corpus(charts, seed=99, manifest_path=manifest_path)
        assert stored == first
        recomputed = split_corpus(charts, seed=7)
        assert recomputed.train_ids == first.train_ids
        assert recomputed.eval_ids == first.eval_ids

        mutated = split_fixture()
        mutated[3] = chart("c003", ["entirely different text"])
        with pytest.raises(ManifestConflict):
            split_corpus(mutated, seed=7, manifest_path=manifest_path)

        # Lines are seeded noise so their shingle sets barely overlap;
        # replacing 1 of 20 lines leaves roughly 19/21 ~ 0.90 overlap,
        # and two 15-line notes sharing 10 lines sit near 10/20 = 0.50.
        base_lines = [noise_line("base", i) for i in range(20)]
        near_lines = list(base_lines)
        near_lines[10] = noise_line("swap", 10)
        shared = [noise_line("shared", i) for i in range(10)]
        half_a = shared + [noise_line("left", i) for i in range(5)]
        half_b = shared + [noise_line("right", i) for i in range(5)]

        near_overlap = shingle_jaccard(
            shingles("\n".join(base_lines)), shingles("\n".join(near_lines))
        )
        half_overlap = shingle_jaccard(
            shingles("\n".join(half_a)), shingles("\n".join(half_b))
        )
        assert 0.85 <= near_overlap <= 0.95
        assert 0.40 <= half_overlap <= 0.60

        result = dedupe(
            [
                chart("d000", base_lines),
                chart("d001", near_lines),
                chart("d002", half_a),
                chart("d003", half_b),
            ],
            threshold=0.85,
        )
        assert [c.chart_id for c in result.kept] == ["d000", "d002", "d003"]
        assert [entry["removed"] for entry in result.removed] == ["d001"]
        assert result.removed[0]["kept"] == "d000"


# --- IQR outliers -----------------------------------------------------

# Sorted F1 values [0.50, 0.85, 0.86, 0.87, 0.88, 0.90]: Q1 = 0.8525
# (rank 1.25), Q3 = 0.8775 (rank 3.75), IQR = 0.025, lower bound
# 0.8525 - 1.5 * 0.025 = 0.815. Only 0.50 falls below it.
OUTLIER_ROWS = [
    ("E11", 0.90, 40),
    ("I10", 0.88, 35),
    ("N18", 0.87, 22),
    ("I50", 0.86, 18),
    ("R54", 0.85, 15),
    ("Z59", 0.50, 12),
]


def outlier_code_rows(fixture):
    return [
        CodeRow(key, n_cases, n_cases, n_cases, 1.0, 1.0, f1)
        for key, f1, n_cases in fixture
    ]


def test_iqr_outlier_fixture():
    with criterion("IQR rule flags exactly the low category and honors min-cases"):
        report = iqr_outliers(outlier_code_rows(OUTLIER_ROWS), min_cases=10)
        assert [row.key for row in report.flagged] == ["Z59"]
        assert report.q1 == pytest.approx(0.8525)
        assert report.q3 == pytest.approx(0.8775)
        assert report.lower_bound == pytest.approx(0.815)

        with_sparse = OUTLIER_ROWS + [("Z99", 0.10, 9)]
        report = iqr_outliers(outlier_code_rows(with_sparse), min_cases=10)
        assert [row.key for row in report.flagged] == ["Z59"]
        assert report.eligible_count == 6


# --- expert evaluation pipeline ---------------------------------------

def expert_record(chart_id, *codes):
    return {
        "chart_id": chart_id,
        "assignments": [
            {"code": code, "evidence_lines": [0], "rationale": "documented"}
            for code in codes
        ],
    }


def test_expert_eval_superset():
    with criterion("expert eval: perfect recall, analytic precision, exact SEM"):
        # Predictions strictly superset the expert labels; per chart the
        # precisions are 1/2, 2/3, 1 whose mean is 13/18 with sample SEM
        # sqrt(7)/18, and the level-3 F1 mean is 37/45.
        expert = [
            expert_record("a", "Z59.0"),
            expert_record("b", "E11.9", "I10"),
            expert_record("c", "M81.0"),
        ]
        preds = [
            expert_record("a", "Z59.0", "I10"),
            expert_record("b", "E11.9", "I10", "Z59.1"),
            expert_record("c", "M81.0"),
        ]
        report = evaluate_expert(preds, expert)
        check_expert_nesting(report)
        assert report["n_charts"] == 3
        for level in ("0", "1", "2", "3"):
            entry = report["levels"][level]
            assert entry["recall"] == {"mean": 1.0, "sem": 0.0}
            assert entry["precision"]["mean"] == pytest.approx(13 / 18, abs=1e-12)
            assert entry["precision"]["sem"] == pytest.approx(
                math.sqrt(7) / 18, abs=1e-12
            )
        assert report["levels"]["3"]["f1"]["mean"] == pytest.approx(37 / 45, abs=1e-12)
        assert mean_sem([0.5, 1.0]) == {"mean": 0.75, "sem": 0.25}

        domains = load_domain_categories()
        mixed = [
            expert_record(
                "m", "Z59.0", "M81.0", "I50.9", "W06", "E11.9", "C50.9", "A00.0"
            )
        ]
        filtered, summary = filter_domain(mixed, domains)
        kept = [a["code"] for a in filtered[0]["assignments"]]
        assert kept == ["Z59.0", "M81.0", "I50.9", "W06"]
        assert summary["removed"] == 3
        assert summary["retained_by_domain"] == {
            "AdvancedIllness": 1,
            "Frailty": 2,
            "SDoH": 1,
        }
