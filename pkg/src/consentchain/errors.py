"""Exception hierarchy shared by every consentchain module.

Each exception carries a ``code`` equal to its class name so CLI transcripts
and scenario expectations can match on a stable machine-readable string.
"""

from __future__ import annotations


class ConsentChainError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# domain model
class IncompletePpa(ConsentChainError):
    pass


class UnknownPhi(ConsentChainError):
    pass


class MissingContextField(ConsentChainError):
    pass


class InvalidCondition(ConsentChainError, ValueError):
    pass


# ledger
class DuplicateTxId(ConsentChainError):
    pass


class UnknownTarget(ConsentChainError):
    pass


class NotYetDue(ConsentChainError):
    pass


class ChainFormatError(ConsentChainError):
    pass


# consent contract
class PpaConflict(ConsentChainError):
    def __init__(self, report, message: str = "PPA revision required") -> None:
        super().__init__(message)
        self.report = report


class DuplicatePpaId(ConsentChainError):
    pass


class UnknownPpa(ConsentChainError):
    pass


class TamperedPpa(ConsentChainError):
    pass


class ConsentConflict(ConsentChainError):
    def __init__(self, report, message: str = "consent must be modified and tested to be added") -> None:
        super().__init__(message)
        self.report = report


class ValidationFailed(ConsentChainError):
    def __init__(self, findings, message: str | None = None) -> None:
        codes = ", ".join(f.code for f in findings)
        super().__init__(message or f"consent failed validation: {codes}")
        self.findings = list(findings)


class UnknownConsent(ConsentChainError):
    pass


class UnknownPatient(ConsentChainError):
    pass


# provenance
class MalformedEvent(ConsentChainError):
    pass


class UnknownKey(ConsentChainError):
    pass


# cli
class ScenarioParseError(ConsentChainError):
    pass


class DuplicateContainer(ConsentChainError):
    pass


class DuplicateConsentId(ConsentChainError):
    pass


class UnknownFunction(ConsentChainError):
    pass
