"""Schema-constrained chat gateway.

All model traffic flows through `ChatGateway.chat`, which validates
responses against a named output schema, re-prompts with the validation
error on failure, enforces token budgets, and appends one audit record
per attempt. Providers are pluggable; the bundled mock provider is a
pure function of the request and drives every offline pipeline run.
"""

from .core import ChatGateway, GatewayConfig
from .providers import ChatRequest, HttpChatProvider, MockChatProvider, ProviderResponse
from .schemas import (
    CODE_SELECTION,
    CPT_ASSIGNMENTS,
    DESCRIPTION_LIST,
    ICD_ASSIGNMENTS,
    META_DESCRIPTION,
    NOTE_TEXT,
    SCHEMA_IDS,
    ValidatedOutput,
    serialize_payload,
    validate_schema,
)

__all__ = [
    "ChatGateway",
    "GatewayConfig",
    "ChatRequest",
    "ProviderResponse",
    "HttpChatProvider",
    "MockChatProvider",
    "SCHEMA_IDS",
    "ICD_ASSIGNMENTS",
    "CPT_ASSIGNMENTS",
    "NOTE_TEXT",
    "META_DESCRIPTION",
    "CODE_SELECTION",
    "DESCRIPTION_LIST",
    "ValidatedOutput",
    "validate_schema",
    "serialize_payload",
]
