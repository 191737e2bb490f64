"""Plain-dict (JSON-ready) forms of domain values, with canonical ordering."""

from __future__ import annotations

from datetime import date
from typing import Any

from .conditions import (
    AccessFrequency,
    CalendarExpiry,
    Condition,
    DayOfWeek,
    GeoFence,
    IpAllowlist,
    TimeWindow,
    WEEKDAYS,
)
from .types import (
    ArchiveReasonKind,
    ConsentState,
    InformedConsent,
    OperationKind,
    Ppa,
    UserRef,
)


def condition_to_dict(c: Condition) -> dict[str, Any]:
    if isinstance(c, TimeWindow):
        return {"kind": c.kind, "start_minute": c.start_minute, "end_minute": c.end_minute}
    if isinstance(c, CalendarExpiry):
        return {"kind": c.kind, "expiry_date": c.expiry_date.isoformat()}
    if isinstance(c, DayOfWeek):
        return {"kind": c.kind, "allowed_days": [d for d in WEEKDAYS if d in c.allowed_days]}
    if isinstance(c, GeoFence):
        return {"kind": c.kind, "allowed_zones": sorted(c.allowed_zones)}
    if isinstance(c, IpAllowlist):
        return {"kind": c.kind, "allowed_prefixes": sorted(c.allowed_prefixes)}
    if isinstance(c, AccessFrequency):
        return {"kind": c.kind, "max_uses": c.max_uses}
    raise TypeError(f"not a condition: {c!r}")


def condition_from_dict(d: dict[str, Any]) -> Condition:
    kind = d["kind"]
    if kind == "TimeWindow":
        return TimeWindow(int(d["start_minute"]), int(d["end_minute"]))
    if kind == "CalendarExpiry":
        return CalendarExpiry(date.fromisoformat(d["expiry_date"]))
    if kind == "DayOfWeek":
        return DayOfWeek(frozenset(d["allowed_days"]))
    if kind == "GeoFence":
        return GeoFence(frozenset(d["allowed_zones"]))
    if kind == "IpAllowlist":
        return IpAllowlist(frozenset(d["allowed_prefixes"]))
    if kind == "AccessFrequency":
        return AccessFrequency(int(d["max_uses"]))
    raise ValueError(f"unknown condition kind {kind!r}")


def consent_to_dict(ic: InformedConsent) -> dict[str, Any]:
    out = {
        "consent_id": ic.consent_id,
        "patient_id": ic.patient_id,
        "users": [str(u) for u in sorted(ic.users)],
        "objects": sorted(ic.objects),
        "operations": [op.value for op in OperationKind if op in ic.operations],
        "conditions": [condition_to_dict(c) for c in ic.sorted_conditions()],
        "state": ic.state.value,
    }
    if not ic.active:
        out["archive_reason"] = ic.archive_reason.value
        out["archived_at"] = ic.archived_at
    return out


def consent_from_dict(d: dict[str, Any]) -> InformedConsent:
    reason = d.get("archive_reason")
    return InformedConsent(
        consent_id=d["consent_id"],
        patient_id=d["patient_id"],
        users=frozenset(UserRef.parse(u) for u in d["users"]),
        objects=frozenset(d["objects"]),
        operations=frozenset(OperationKind(o) for o in d["operations"]),
        conditions=frozenset(condition_from_dict(c) for c in d.get("conditions", [])),
        state=ConsentState(d.get("state", "Active")),
        archive_reason=ArchiveReasonKind(reason) if reason else None,
        archived_at=d.get("archived_at"),
    )


def ppa_to_dict(ppa: Ppa) -> dict[str, Any]:
    return {
        "ppa_id": ppa.ppa_id,
        "patient_id": ppa.patient_id,
        "pc": list(ppa.pc),
        "prc": list(ppa.prc),
        "roc": list(ppa.roc),
        "icc": [consent_to_dict(ic) for ic in ppa.icc],
        "validity_end": ppa.validity_end.isoformat() if ppa.validity_end else None,
    }


def ppa_from_dict(d: dict[str, Any]) -> Ppa:
    end = d.get("validity_end")
    return Ppa(
        ppa_id=d["ppa_id"],
        patient_id=d["patient_id"],
        pc=tuple(d.get("pc", ())),
        prc=tuple(d.get("prc", ())),
        roc=tuple(d.get("roc", ())),
        icc=tuple(consent_from_dict({"patient_id": d["patient_id"], **ic}) for ic in d.get("icc", ())),
        validity_end=date.fromisoformat(end) if end else None,
    )
