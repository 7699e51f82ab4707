"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: `UsageError` family is handled by
click itself, `DataError` subclasses exit with 2, `ProviderError`
subclasses with 3.
"""


class MedCodeFlowError(Exception):
    """Base class for all toolkit errors."""


class DataError(MedCodeFlowError):
    """Invalid or inconsistent input data (CLI exit code 2)."""


class ProviderError(MedCodeFlowError):
    """Failure attributable to an external provider (CLI exit code 3)."""


# --- code taxonomy ---------------------------------------------------------


class MalformedCode(DataError):
    """A code string violates its system's structural pattern.

    `position` is the index of the first offending character in the
    input, or None when the problem is structural (empty, too short,
    misplaced dot).
    """

    def __init__(self, message: str, position: "int | None" = None):
        super().__init__(message)
        self.position = position


class UnmappedCategory(DataError):
    """A category falls outside every configured range."""


class CatalogError(DataError):
    """Base for catalog file problems."""


class ParseError(CatalogError):
    """Unparseable catalog content. Carries the 1-based line number."""

    def __init__(self, message: str, line_number: "int | None" = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DuplicateCode(CatalogError):
    pass


class InvalidRange(CatalogError):
    pass


class EmptyCatalog(DataError):
    pass


# --- embedding / retrieval -------------------------------------------------


class DimensionMismatch(DataError):
    pass


class ProviderMismatch(DataError):
    """An index was built by a different embedding provider than configured."""


class CorruptIndex(DataError):
    pass


# --- model gateway ---------------------------------------------------------


class ProviderUnavailable(ProviderError):
    """Transport-level failure after exhausting retries."""


class SchemaViolation(ProviderError):
    """Model output failed schema validation after all retries.

    `json_path` points at the first offending element; `raw_text` is the
    final raw model output, kept for the audit trail.
    """

    def __init__(self, message: str, json_path: str = "$", raw_text: str = ""):
        super().__init__(message)
        self.json_path = json_path
        self.raw_text = raw_text


class BudgetExceeded(ProviderError):
    """Cumulative token spend crossed the configured ceiling."""


# --- synthesis -------------------------------------------------------------


class PhiFilterRejection(DataError):
    """Text tripped the PHI screen and was quarantined."""

    def __init__(self, message: str, findings: "list[str] | None" = None):
        super().__init__(message)
        self.findings = findings or []


class SecureContextViolation(DataError):
    """Source-note ingestion attempted outside the flagged directory."""


class EmptyPool(DataError):
    pass


class UnknownSpecialty(DataError):
    pass


class TemplateMissing(DataError):
    pass


# --- dataset prep ----------------------------------------------------------


class OversizedSample(DataError):
    """A single sample exceeds the packing budget on its own."""


class CorruptSegments(DataError):
    """Packed-sequence metadata is internally inconsistent."""


class ManifestConflict(DataError):
    """A persisted split manifest disagrees with the corpus on disk."""


# --- evaluation ------------------------------------------------------------


class CatalogDriftError(DataError):
    """Predictions and gold were produced against different catalog versions."""


# --- review ----------------------------------------------------------------


class InvalidDecision(DataError):
    """A review decision violates the protocol (bad verdict, missing reason)."""


class IncompleteReview(DataError):
    """Export requested before every label received a decision."""

    def __init__(self, message: str, completeness: float = 0.0):
        super().__init__(message)
        self.completeness = completeness
