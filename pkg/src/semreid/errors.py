"""Exception hierarchy shared by every semreid module.

All errors subclass :class:`ValueError` so callers that only care about
"bad input" can keep catching the builtin, while the CLI maps them onto
exit status 1. Each error carries a short ``code`` naming the violated
invariant (``duplicate-attribute``, ``dimension-mismatch`` ...).
"""

from __future__ import annotations


class SemReidError(ValueError):
    """Base class for validation failures raised by the package."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code
        self.detail = message


class OntologyError(SemReidError):
    """Malformed or inconsistent attribute ontology."""


class DatasetError(SemReidError):
    """Descriptor records that violate the dataset contract."""


class ModelError(SemReidError):
    """Invalid training input or inconsistent trained models."""


class CalibrationError(SemReidError):
    """Threshold calibration received misaligned or empty input."""


class RetrievalError(SemReidError):
    """Query execution failed (bad filter, dimension mismatch...)."""


class MetricError(SemReidError):
    """Metric preconditions do not hold."""


class SynthConfigError(SemReidError):
    """Synthetic generator configuration is invalid."""


class ChecksumError(SemReidError):
    """Artifacts produced against different ontologies were combined."""

    def __init__(self, expected: str, found: str, *, artifact: str) -> None:
        super().__init__(
            "checksum-mismatch",
            f"{artifact} was built for ontology {found[:12]}, expected {expected[:12]}",
        )
        self.expected = expected
        self.found = found
