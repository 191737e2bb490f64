"""Authorization module: match a request to consents, evaluate conditions, log the decision.

Decisions are submitted to the ledger but not sealed here. Use counts read
only sealed ``AccessGranted`` events, so a caller that wants the fifth grant
to count against the sixth request must seal in between.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .clock import to_ms
from .contract.consent_contract import CONSENT_CONTRACT
from .contract.service import ConsentService
from .domain.conditions import AccessFrequency, CalendarExpiry, Condition, RequestContext, Verdict
from .domain.serialize import condition_from_dict, condition_to_dict
from .domain.types import ArchiveReasonKind, InformedConsent, OperationKind, UserRef
from .errors import MissingContextField
from .ledger.chain import EventKind, EventRecord


class Outcome(str, enum.Enum):
    GRANT = "Grant"
    DENY = "Deny"


class DenyCode(str, enum.Enum):
    NO_CONSENT = "NoConsent"
    CONDITION_VIOLATED = "ConditionViolated"
    FREQUENCY_EXHAUSTED = "FrequencyExhausted"
    CONSENT_ARCHIVED = "ConsentArchived"
    MATRIX_VIOLATION = "MatrixViolation"
    POLICY_DENIED = "PolicyDenied"


@dataclass(frozen=True)
class DenyReason:
    code: DenyCode
    condition: Condition | None = None
    consent_id: str | None = None

    def __str__(self) -> str:
        if self.condition is not None:
            return f"{self.code.value}({self.condition.label})"
        return self.code.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "code": self.code.value,
            "condition": condition_to_dict(self.condition) if self.condition is not None else None,
            "consent_id": self.consent_id,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DenyReason":
        cond = d.get("condition")
        return cls(DenyCode(d["code"]), condition_from_dict(cond) if cond else None, d.get("consent_id"))


@dataclass(frozen=True)
class AccessRequest:
    request_id: str
    subject: UserRef
    patient_id: str
    phi_id: str
    operation: OperationKind
    context: RequestContext = field(default_factory=RequestContext)

    def __post_init__(self) -> None:
        object.__setattr__(self, "operation", OperationKind(self.operation))
        if self.context.timestamp is None:
            raise MissingContextField("timestamp")


@dataclass(frozen=True)
class AccessDecision:
    request_id: str
    outcome: Outcome
    matched_consent: str | None
    reasons: tuple[DenyReason, ...]
    decided_at: int
    logged_tx: str
    subject: str = ""
    phi_id: str = ""
    operation: str = ""
    use_ordinal: int | None = None

    def __post_init__(self) -> None:
        if self.outcome is Outcome.GRANT and (self.matched_consent is None or self.reasons):
            raise ValueError("a grant names its consent and carries no reasons")
        if self.outcome is Outcome.DENY and not self.reasons:
            raise ValueError("a deny carries at least one reason")

    @property
    def granted(self) -> bool:
        return self.outcome is Outcome.GRANT

    @property
    def reason_codes(self) -> list[str]:
        return [r.code.value for r in self.reasons]

    def to_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "outcome": self.outcome.value,
            "matched_consent": self.matched_consent,
            "reasons": [r.to_dict() for r in self.reasons],
            "decided_at": self.decided_at,
            "logged_tx": self.logged_tx,
            "subject": self.subject,
            "phi_id": self.phi_id,
            "operation": self.operation,
            "use_ordinal": self.use_ordinal,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_event(cls, ev: EventRecord) -> "AccessDecision":
        p = ev.payload
        return cls(
            request_id=p["request_id"],
            outcome=Outcome(p["outcome"]),
            matched_consent=p["consent_id"],
            reasons=tuple(DenyReason.from_dict(r) for r in p["reasons"]),
            decided_at=p["decided_at"],
            logged_tx=ev.tx_id,
            subject=p["user"],
            phi_id=p["phi_id"],
            operation=p["operation"],
            use_ordinal=p["use_ordinal"],
        )


def export_decisions(decisions: Iterable[AccessDecision]) -> str:
    """One canonical JSON line per decision."""
    return "".join(d.to_line() + "\n" for d in decisions)


PolicyHook = Callable[[AccessRequest], bool]


def permit_all(request: AccessRequest) -> bool:
    return True


def _dedupe(reasons: Iterable[DenyReason]) -> tuple[DenyReason, ...]:
    seen: list[DenyReason] = []
    for r in reasons:
        if r not in seen:
            seen.append(r)
    return tuple(seen)


class Authorizer:
    """Stateless over the service: every answer is derived from the container and ledger."""

    def __init__(self, service: ConsentService, policy_hook: PolicyHook = permit_all,
                 sweep_first: bool | None = None) -> None:
        self.service = service
        self.policy_hook = policy_hook
        self.sweep_first = service.auto_sweep if sweep_first is None else sweep_first

    def use_count(self, consent_id: str) -> int:
        return self.service.ledger.grant_count(consent_id)

    def _pending_grants(self, consent_id: str) -> int:
        n = 0
        for tx in self.service.ledger.pending:
            if tx.call == "log_access":
                args = tx.decoded_args()
                n += args["outcome"] == Outcome.GRANT.value and args["consent_id"] == consent_id
        return n

    def _evaluate(self, ic: InformedConsent, ctx: RequestContext) -> list[DenyReason]:
        ctx = ctx.with_use_count(self.use_count(ic.consent_id))
        failures = []
        for cond in ic.sorted_conditions():
            try:
                verdict = cond.evaluate(ctx).verdict
            except MissingContextField:
                verdict = Verdict.VIOLATED  # fail closed on absent attributes
            if verdict is Verdict.EXHAUSTED:
                failures.append(DenyReason(DenyCode.FREQUENCY_EXHAUSTED, cond, ic.consent_id))
            elif verdict is Verdict.VIOLATED:
                failures.append(DenyReason(DenyCode.CONDITION_VIOLATED, cond, ic.consent_id))
        return failures

    @staticmethod
    def _archived_reasons(entries, req: AccessRequest) -> list[DenyReason]:
        out = []
        for cid in sorted(entries):
            entry = entries[cid]
            if not entry.consent.covers(req.subject, req.phi_id, req.operation):
                continue
            if entry.reason is ArchiveReasonKind.EXPIRED and isinstance(entry.violated, AccessFrequency):
                out.append(DenyReason(DenyCode.FREQUENCY_EXHAUSTED, entry.violated, cid))
            elif entry.reason is ArchiveReasonKind.EXPIRED and isinstance(entry.violated, CalendarExpiry):
                out.append(DenyReason(DenyCode.CONDITION_VIOLATED, entry.violated, cid))
            else:
                out.append(DenyReason(DenyCode.CONSENT_ARCHIVED, None, cid))
        return out

    def authorize(self, req: AccessRequest) -> AccessDecision:
        svc = self.service
        view = svc.container(req.patient_id)  # raises UnknownPatient
        phi_id = svc.catalog.resolve(req.phi_id)  # raises UnknownPhi
        if phi_id != req.phi_id:
            req = AccessRequest(req.request_id, req.subject, req.patient_id, phi_id, req.operation, req.context)
        svc.advance_clock(req.context.timestamp)
        if self.sweep_first:
            svc.expire_sweep()
            view = svc.container(req.patient_id)

        candidates = [ic for ic in view.active() if ic.covers(req.subject, phi_id, req.operation)]
        matched = None
        reasons: list[DenyReason] = []
        if not self.policy_hook(req):
            reasons.append(DenyReason(DenyCode.POLICY_DENIED))
        else:
            for ic in candidates:
                failures = self._evaluate(ic, req.context)
                if not failures:
                    matched = ic
                    break
                reasons.extend(failures)
            if matched is None and not candidates:
                reasons.extend(self._archived_reasons(view.archive, req) or [DenyReason(DenyCode.NO_CONSENT)])
                if not svc.matrix.permits(req.subject.role, phi_id, req.operation):
                    reasons.append(DenyReason(DenyCode.MATRIX_VIOLATION))

        outcome = Outcome.GRANT if matched is not None else Outcome.DENY
        ordinal = None
        if matched is not None:
            reasons = []
            ordinal = self.use_count(matched.consent_id) + self._pending_grants(matched.consent_id) + 1
        reasons_t = _dedupe(reasons)
        decided_at = svc.clock.now_ms()
        ctx = req.context
        payload = {
            "request_id": req.request_id,
            "patient_id": req.patient_id,
            "consent_id": matched.consent_id if matched else None,
            "user": str(req.subject),
            "role": req.subject.role.value,
            "phi_id": phi_id,
            "operation": req.operation.value,
            "outcome": outcome.value,
            "reasons": [r.to_dict() for r in reasons_t],
            "evaluated": [ic.consent_id for ic in candidates],
            "requested_at": to_ms(ctx.timestamp),
            "zone": ctx.zone,
            "source_address": ctx.source_address,
            "decided_at": decided_at,
            "use_ordinal": ordinal,
        }
        tx = svc.build_tx(CONSENT_CONTRACT, "log_access", payload)
        svc.submit(tx)
        return AccessDecision(req.request_id, outcome, payload["consent_id"], reasons_t, decided_at, tx.tx_id,
                              payload["user"], phi_id, req.operation.value, ordinal)

    def replay_decisions(self, patient_id: str) -> list[AccessDecision]:
        """Rebuild every sealed decision for a patient from ledger events alone, in block order."""
        ledger = self.service.ledger
        return [AccessDecision.from_event(ev) for ev in ledger.events(patient_id=patient_id)
                if ev.kind in (EventKind.ACCESS_GRANTED, EventKind.ACCESS_DENIED)]
