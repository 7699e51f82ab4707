"""HTTP service for the expert review protocol.

Serves charts with their labels and evidence highlights, records
accept/reject decisions into the append-only store, reports progress,
and exports expert ground truth. The service is the only writer of its
store; restarting it replays the event log, so no state lives outside
the JSONL files it was pointed at.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel, Field

from ..errors import IncompleteReview, InvalidDecision
from ..jsonl import read_jsonl, write_jsonl
from ..taxonomy import load_catalog
from .store import VERDICTS, DecisionStore, export_ground_truth

DEFAULT_PAGE_SIZE = 50

TOKEN_HEADER = "X-Review-Token"


class DecisionBody(BaseModel):
    code: str = Field(min_length=1)
    verdict: str
    reviewer_id: str = Field(min_length=1)
    reason: str = ""
    idempotency_key: str | None = None


class ExportBody(BaseModel):
    reviewer_id: str | None = None
    consensus: bool = False
    force: bool = False


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


class ReviewState:
    """Corpus, labels, and decisions backing one review session."""

    def __init__(
        self,
        corpus_path: str | Path,
        gold_path: str | Path,
        store_path: str | Path,
        catalog_path: str | Path | None = None,
        export_path: str | Path | None = None,
    ):
        self.charts = {rec["chart_id"]: rec for rec in read_jsonl(corpus_path)}
        self.gold_records = list(read_jsonl(gold_path))
        missing = [r["chart_id"] for r in self.gold_records if r["chart_id"] not in self.charts]
        if missing:
            raise InvalidDecision(
                f"gold file references charts absent from the corpus: {missing[:3]}"
            )
        self.labels_of = {r["chart_id"]: r["assignments"] for r in self.gold_records}
        self.store = DecisionStore(store_path)
        self.descriptions: dict[str, str] = {}
        if catalog_path is not None:
            self.descriptions = dict(load_catalog(catalog_path).entries)
        self.export_path = Path(export_path) if export_path else None

    # -- derived views --

    def label_keys(self) -> list[tuple[str, str]]:
        return [
            (chart_id, assignment["code"])
            for chart_id, assignments in self.labels_of.items()
            for assignment in assignments
        ]

    def decided_keys(self) -> set[tuple[str, str]]:
        return {(d.chart_id, d.code) for d in self.store.latest().values()}

    def chart_progress(self, chart_id: str) -> dict:
        labels = self.labels_of.get(chart_id, [])
        decided = self.decided_keys()
        done = sum(1 for a in labels if (chart_id, a["code"]) in decided)
        return {"decided": done, "total": len(labels)}

    def progress(self) -> dict:
        keys = self.label_keys()
        decided = self.decided_keys()
        done = sum(1 for key in keys if key in decided)
        return {
            "total": len(keys),
            "decided": done,
            "completeness": done / len(keys) if keys else 1.0,
            "charts": [
                {"chart_id": chart_id, **self.chart_progress(chart_id)}
                for chart_id in self.charts
            ],
        }


def create_app(
    corpus_path: str | Path,
    gold_path: str | Path,
    store_path: str | Path,
    catalog_path: str | Path | None = None,
    static_dir: str | Path | None = None,
    token: str | None = None,
    export_path: str | Path | None = None,
) -> FastAPI:
    state = ReviewState(
        corpus_path, gold_path, store_path,
        catalog_path=catalog_path, export_path=export_path,
    )
    app = FastAPI(title="medcodeflow review service")
    app.state.review = state

    def check_token(x_review_token: str | None = Header(default=None)) -> None:
        if token is not None and x_review_token != token:
            raise _error(401, "unauthorized", f"missing or wrong {TOKEN_HEADER} header")

    guard = [Depends(check_token)]

    @app.get("/api/charts", dependencies=guard)
    def list_charts(cursor: str = "", limit: int = DEFAULT_PAGE_SIZE):
        ids = list(state.charts)
        start = 0
        if cursor:
            try:
                start = ids.index(cursor) + 1
            except ValueError:
                raise _error(400, "bad_cursor", f"unknown cursor {cursor!r}")
        page = ids[start : start + max(1, limit)]
        next_cursor = page[-1] if page and start + len(page) < len(ids) else None
        return {
            "charts": [
                {
                    "chart_id": chart_id,
                    "domain_tags": state.charts[chart_id].get("domain_tags", []),
                    "progress": state.chart_progress(chart_id),
                }
                for chart_id in page
            ],
            "next_cursor": next_cursor,
        }

    @app.get("/api/charts/{chart_id}", dependencies=guard)
    def get_chart(chart_id: str):
        chart = state.charts.get(chart_id)
        if chart is None:
            raise _error(404, "unknown_chart", f"no chart {chart_id!r} in corpus")
        latest = state.store.latest()
        decisions_of: dict[str, list[dict]] = {}
        for d in latest.values():
            if d.chart_id == chart_id:
                decisions_of.setdefault(d.code, []).append(d.to_dict())
        labels = [
            {
                "code": a["code"],
                "description": state.descriptions.get(a["code"]),
                "rationale": a.get("rationale", ""),
                "evidence_lines": a.get("evidence_lines", []),
                "decisions": sorted(
                    decisions_of.get(a["code"], []), key=lambda d: d["reviewer_id"]
                ),
            }
            for a in state.labels_of.get(chart_id, [])
        ]
        return {"chart": chart, "labels": labels, "progress": state.chart_progress(chart_id)}

    @app.get("/api/catalog/{code}", dependencies=guard)
    def get_description(code: str):
        description = state.descriptions.get(code)
        if description is None:
            raise _error(404, "unknown_code", f"no description for {code!r}")
        return {"code": code, "description": description}

    @app.post("/api/charts/{chart_id}/decisions", dependencies=guard)
    def post_decision(chart_id: str, body: DecisionBody):
        if chart_id not in state.charts:
            raise _error(404, "unknown_chart", f"no chart {chart_id!r} in corpus")
        labeled_codes = {a["code"] for a in state.labels_of.get(chart_id, [])}
        if body.code not in labeled_codes:
            raise _error(
                422, "unknown_label", f"chart {chart_id!r} has no label {body.code!r}"
            )
        if body.verdict not in VERDICTS:
            raise _error(422, "bad_verdict", f"verdict must be one of {VERDICTS}")
        try:
            decision = state.store.record(
                chart_id=chart_id,
                code=body.code,
                reviewer_id=body.reviewer_id,
                verdict=body.verdict,
                reason=body.reason,
                idempotency_key=body.idempotency_key,
            )
        except InvalidDecision as exc:
            raise _error(422, "invalid_decision", str(exc))
        return {"decision": decision.to_dict(), "progress": state.chart_progress(chart_id)}

    @app.get("/api/progress", dependencies=guard)
    def get_progress():
        return state.progress()

    @app.post("/api/export", dependencies=guard)
    def post_export(body: ExportBody):
        try:
            result = export_ground_truth(
                state.gold_records,
                state.store,
                reviewer_id=body.reviewer_id,
                consensus=body.consensus,
                force=body.force,
            )
        except IncompleteReview as exc:
            raise _error(409, "incomplete_review", str(exc))
        except InvalidDecision as exc:
            raise _error(422, "invalid_export", str(exc))
        path = None
        if state.export_path is not None:
            write_jsonl(state.export_path, list(result.records))
            path = str(state.export_path)
        return {
            "records": list(result.records),
            "completeness": result.completeness,
            "undecided": [list(key) for key in result.undecided],
            "path": path,
        }

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
