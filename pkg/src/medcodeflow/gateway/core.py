"""The gateway proper: validate-then-retry, budgets, throttling, audit."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from ..errors import BudgetExceeded, ProviderUnavailable, SchemaViolation
from ..hashing import content_hash
from ..jsonl import append_jsonl
from .providers import ChatProvider, ChatRequest
from .schemas import ValidatedOutput, validate_schema

__all__ = ["GatewayConfig", "ChatGateway"]


@dataclass
class GatewayConfig:
    retries: int = 2  # schema-validation retries after the first attempt
    max_total_tokens: int | None = None
    requests_per_second: float | None = None
    audit_path: str | Path | None = None


class ChatGateway:
    """Single entry point for model calls.

    Every attempt (including retries) appends one audit record with the
    request hash, response hash, and outcome; secrets never appear in
    audit output because providers read keys from the environment and
    hashes cover only prompt content.
    """

    def __init__(self, provider: ChatProvider, config: GatewayConfig | None = None):
        self.provider = provider
        self.config = config or GatewayConfig()
        self.audit: list[dict] = []
        self.tokens_spent = 0
        self._lock = threading.Lock()
        self._last_call = 0.0

    def _throttle(self) -> None:
        rps = self.config.requests_per_second
        if not rps:
            return
        with self._lock:
            wait = self._last_call + 1.0 / rps - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last_call = time.monotonic()

    def _record(self, request: ChatRequest, response_text: str | None, outcome: str, attempt: int) -> None:
        record = {
            "attempt": attempt,
            "schema_id": request.schema_id,
            "tag": request.template_tag,
            "request_hash": content_hash(
                request.system_prompt, request.user_prompt, request.schema_id, str(request.seed)
            ),
            "response_hash": content_hash(response_text) if response_text is not None else None,
            "outcome": outcome,
        }
        with self._lock:
            self.audit.append(record)
            if self.config.audit_path is not None:
                append_jsonl(self.config.audit_path, record)

    def _account(self, prompt_tokens: int, completion_tokens: int) -> None:
        with self._lock:
            self.tokens_spent += prompt_tokens + completion_tokens
            ceiling = self.config.max_total_tokens
            if ceiling is not None and self.tokens_spent > ceiling:
                raise BudgetExceeded(
                    f"token budget exhausted: spent {self.tokens_spent} of {ceiling}"
                )

    def chat(self, request: ChatRequest) -> ValidatedOutput:
        """Call the provider and validate the response.

        On SchemaViolation the request is retried with the validator
        error appended to the user prompt, up to `config.retries` times.
        The final violation propagates; transport failures and budget
        overruns propagate immediately.
        """
        attempt_request = request
        last_violation: SchemaViolation | None = None
        for attempt in range(self.config.retries + 1):
            self._throttle()
            try:
                response = self.provider.complete(attempt_request)
            except ProviderUnavailable:
                self._record(attempt_request, None, "transport_error", attempt)
                raise
            try:
                self._account(response.prompt_tokens, response.completion_tokens)
            except BudgetExceeded:
                self._record(attempt_request, response.text, "budget_exceeded", attempt)
                raise
            try:
                validated = validate_schema(response.text, request.schema_id)
            except SchemaViolation as exc:
                self._record(attempt_request, response.text, "schema_violation", attempt)
                last_violation = exc
                feedback = (
                    f"\n\nYour previous response was rejected: {exc} "
                    f"(at {exc.json_path}). Respond with JSON valid for "
                    f"schema {request.schema_id} and nothing else."
                )
                attempt_request = replace(
                    attempt_request, user_prompt=request.user_prompt + feedback
                )
                continue
            self._record(attempt_request, response.text, "ok", attempt)
            return validated
        assert last_violation is not None
        raise last_violation
