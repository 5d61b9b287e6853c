"""Context-aware PII toolkit: detect, evaluate, redact, judge, review."""

from .model import (
    PiiSpan,
    PiiType,
    Provenance,
    Sample,
    Status,
    TAXONOMY,
    locate_span,
    parse_pii_type,
    validate_sample,
)

__version__ = "0.1.0"

__all__ = [
    "PiiSpan",
    "PiiType",
    "Provenance",
    "Sample",
    "Status",
    "TAXONOMY",
    "locate_span",
    "parse_pii_type",
    "validate_sample",
    "__version__",
]
