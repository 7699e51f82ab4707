"""Chat completion providers.

`HttpChatProvider` speaks the common chat-completions wire shape.
`MockChatProvider` is the offline stand-in: scripted responses keyed by
(schema id, prompt-template tag), and for everything unscripted a
deterministic synthesizer that builds a minimal valid payload from the
request content and seed. The synthesizer understands the structured
prompt blocks, which keeps offline pipeline runs internally coherent:
generated notes mention the code descriptions they were conditioned on,
so retrieval and labeling downstream behave like a faithful miniature
of the real system.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from ..errors import ProviderUnavailable
from ..hashing import canonical_json, stable_hash64
from .blocks import parse_code_items, parse_hints, parse_note_lines

__all__ = ["ChatRequest", "ProviderResponse", "ChatProvider", "HttpChatProvider", "MockChatProvider"]

LLM_API_KEY_VAR = "MCF_LLM_API_KEY"
LLM_BASE_URL_VAR = "MCF_LLM_BASE_URL"

_TAG_RE = re.compile(r"\[template:([\w.@-]+)\]")


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    schema_id: str
    temperature: float = 0.0
    seed: int | None = None
    max_tokens: int | None = None

    @property
    def template_tag(self) -> str:
        m = _TAG_RE.search(self.system_prompt)
        return m.group(1) if m else ""


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int


class ChatProvider(Protocol):
    provider_id: str

    def complete(self, request: ChatRequest) -> ProviderResponse: ...


class HttpChatProvider:
    """Bearer-token client for `POST {base}/chat/completions`.

    The key is read from the environment per call and never stored, so
    request hashes and audit records cannot capture it.
    """

    def __init__(
        self,
        model: str,
        base_url: str | None = None,
        timeout: float = 60.0,
        retries: int = 2,
        backoff: float = 0.5,
    ):
        self.model = model
        self.base_url = base_url or os.environ.get(LLM_BASE_URL_VAR, "")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.provider_id = f"http-chat:{model}"
        if not self.base_url:
            raise ProviderUnavailable(f"no chat base URL configured (set {LLM_BASE_URL_VAR})")

    def complete(self, request: ChatRequest) -> ProviderResponse:
        import httpx

        key = os.environ.get(LLM_API_KEY_VAR, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = httpx.post(
                    self.base_url.rstrip("/") + "/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage", {})
                return ProviderResponse(
                    text=text,
                    prompt_tokens=usage.get(
                        "prompt_tokens",
                        len(request.system_prompt.split()) + len(request.user_prompt.split()),
                    ),
                    completion_tokens=usage.get("completion_tokens", len(text.split())),
                )
            except Exception as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
        raise ProviderUnavailable(f"chat endpoint failed: {last_error}")


# --- mock provider ----------------------------------------------------------

_PHRASES = (
    "Patient reports {d}.",
    "History is notable for {d}.",
    "Examination and review are consistent with {d}.",
    "Ongoing management of {d}.",
)
_LEAD_INS = (
    "Seen in clinic for scheduled follow-up.",
    "Presents for interval reassessment.",
    "Returns for routine evaluation.",
)
_CLOSERS = (
    "Continue current regimen and return as scheduled.",
    "Discussed findings and agreed on the plan below.",
    "Will reassess at the next visit.",
)
_FILLERS = (
    "Tolerated the visit well.",
    "No acute distress observed.",
    "Reviewed prior records in detail.",
)
_STYLES = (
    "concise problem-oriented outpatient note",
    "narrative inpatient progress note",
    "terse systems-based consultation note",
)

_PROC_PREFIX = "Procedure performed:"


def _decap(text: str) -> str:
    """Lowercase a leading capital unless it starts an acronym."""
    if len(text) > 1 and text[0].isupper() and text[1].islower():
        return text[0].lower() + text[1:]
    return text


class MockChatProvider:
    """Deterministic offline chat provider.

    Responses are resolved in two steps. First a script lookup on
    (schema_id, template tag): script files are JSON lines of
    {"schema_id", "tag", "response"}, matched entries are consumed in
    order with the last one repeating, and a string response is
    returned verbatim (letting tests script malformed output). Second,
    unscripted requests are synthesized as a pure function of
    (system_prompt, user_prompt, schema_id, seed).

    The "noisy" profile makes the synthesizer behave like an imperfect
    model: keyed on the request hash it sometimes swaps the top
    candidate for the runner-up or appends a second candidate. Gold
    pipelines use "clean"; prediction runs use "noisy" so evaluations
    exercise real disagreement.
    """

    def __init__(
        self,
        script_path: str | Path | None = None,
        profile: str = "clean",
        drop_pct: int = 10,
        extra_pct: int = 15,
    ):
        if profile not in ("clean", "noisy"):
            raise ValueError(f"unknown mock profile {profile!r}")
        self.profile = profile
        self.drop_pct = drop_pct
        self.extra_pct = extra_pct
        self.provider_id = f"mock-chat:{profile}"
        self._script: dict[tuple[str, str], list[str]] = {}
        self.call_count = 0
        if script_path is not None:
            with open(script_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    response = entry["response"]
                    text = response if isinstance(response, str) else canonical_json(response)
                    key = (entry["schema_id"], entry.get("tag") or "*")
                    self._script.setdefault(key, []).append(text)

    # -- scripted lookup --

    def _scripted(self, schema_id: str, tag: str) -> str | None:
        name = tag.split("@")[0]
        for key in ((schema_id, tag), (schema_id, name), (schema_id, "*")):
            queue = self._script.get(key)
            if queue:
                return queue.pop(0) if len(queue) > 1 else queue[0]
        return None

    # -- synthesis --

    def complete(self, request: ChatRequest) -> ProviderResponse:
        self.call_count += 1
        scripted = self._scripted(request.schema_id, request.template_tag)
        if scripted is not None:
            text = scripted
        else:
            text = canonical_json(self._synthesize(request))
        prompt_tokens = len(request.system_prompt.split()) + len(request.user_prompt.split())
        return ProviderResponse(
            text=text, prompt_tokens=prompt_tokens, completion_tokens=len(text.split())
        )

    def _synthesize(self, request: ChatRequest):
        h = stable_hash64(
            f"{request.system_prompt}\n--\n{request.user_prompt}\n--\n"
            f"{request.schema_id}\n--\n{request.seed}"
        )
        user = request.user_prompt
        schema = request.schema_id
        if schema == "NOTE_TEXT":
            return self._synth_note(user, h, procedure=request.template_tag.startswith("cpt-"))
        if schema == "ICD_ASSIGNMENTS":
            return self._synth_icd_assignments(user, h)
        if schema == "CPT_ASSIGNMENTS":
            return self._synth_cpt_assignments(user, h)
        if schema == "CODE_SELECTION":
            return self._synth_selection(user, h)
        if schema == "DESCRIPTION_LIST":
            return self._synth_descriptions(user)
        if schema == "META_DESCRIPTION":
            return self._synth_meta(user, h)
        return []

    def _synth_note(self, user: str, h: int, procedure: bool) -> dict:
        items = parse_code_items(user)
        hints = parse_hints(user)
        if procedure:
            lines = ["Indication:", _FILLERS[h % len(_FILLERS)]]
            for item in items:
                lines.append(f"{_PROC_PREFIX} {item.description}.")
            lines += ["Findings:", _FILLERS[(h + 1) % len(_FILLERS)]]
            lines += ["Plan:", _CLOSERS[h % len(_CLOSERS)]]
            return {"lines": lines}
        sections = [s for s in hints.get("sections", "").split("|") if s] or [
            "History",
            "Assessment",
            "Plan",
        ]
        body = sections[1:-1] if len(sections) > 2 else sections[:1]
        placed: dict[str, list[str]] = {s: [] for s in body}
        for i, item in enumerate(items):
            phrase = _PHRASES[(h + i) % len(_PHRASES)]
            placed[body[i % len(body)]].append(phrase.format(d=_decap(item.description)))
        lines = [f"{sections[0]}:", _LEAD_INS[h % len(_LEAD_INS)]]
        for section in body:
            if section != sections[0]:
                lines.append(f"{section}:")
            lines.extend(placed[section])
        if len(sections) > 1:
            lines.append(f"{sections[-1]}:")
            lines.append(_CLOSERS[h % len(_CLOSERS)])
        return {"lines": lines}

    def _pick_candidates(self, user: str, h: int) -> list:
        items = parse_code_items(user)
        hints = parse_hints(user)
        threshold = float(hints.get("min_score", "0.30"))
        eligible = [it for it in items if it.score is None or it.score >= threshold]
        if not eligible:
            return []
        if self.profile == "noisy":
            r = h % 100
            if r < self.drop_pct:
                return eligible[1:2]  # swap top for runner-up (or nothing)
            if r >= 100 - self.extra_pct and len(eligible) > 1:
                return eligible[:2]
        return eligible[:1]

    def _synth_icd_assignments(self, user: str, h: int) -> list:
        picked = self._pick_candidates(user, h)
        pairs = parse_note_lines(user)
        line_ids = [i for i, _ in pairs]
        quote = pairs[0][1] if pairs else None
        return [
            {
                "code": it.code,
                "rationale": f"Note documents {_decap(it.description)}",
                "evidence": {"line_index": line_ids, "quote": quote},
            }
            for it in picked
        ]

    def _synth_cpt_assignments(self, user: str, h: int) -> list:
        picked = self._pick_candidates(user, h)
        return [
            {"code": it.code, "rationale": f"Documented procedure: {_decap(it.description)}"}
            for it in picked
        ]

    def _synth_selection(self, user: str, h: int) -> dict:
        items = parse_code_items(user)
        hints = parse_hints(user)
        if not items:
            return {"codes": []}
        if any(it.group is not None for it in items):
            by_group: dict[int, list] = {}
            for it in items:
                by_group.setdefault(it.group or 0, []).append(it)
            codes: list[str] = []
            for group in sorted(by_group):
                members = by_group[group]
                pick = members[h % len(members)] if self.profile == "noisy" else members[0]
                if pick.code not in codes:
                    codes.append(pick.code)
            return {"codes": codes}
        k = max(1, min(int(hints.get("select_max", "3")), len(items)))
        start = h % len(items)
        codes = []
        for j in range(k):
            code = items[(start + j) % len(items)].code
            if code not in codes:
                codes.append(code)
        return {"codes": codes}

    def _synth_descriptions(self, user: str) -> dict:
        descriptions = []
        for _, text in parse_note_lines(user):
            if text.startswith(_PROC_PREFIX):
                desc = text[len(_PROC_PREFIX) :].strip().rstrip(".")
                if desc:
                    descriptions.append(desc)
        return {"descriptions": descriptions}

    def _synth_meta(self, user: str, h: int) -> dict:
        pairs = parse_note_lines(user)
        hints = parse_hints(user)
        headers = [t.rstrip(":").strip() for _, t in pairs if t.endswith(":") and len(t) < 48]
        return {
            "structure": headers or ["History", "Assessment", "Plan"],
            "style_notes": _STYLES[h % len(_STYLES)],
            "specialty": hints.get("specialty", "general_medicine"),
        }
