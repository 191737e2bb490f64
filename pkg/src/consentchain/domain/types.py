"""Core domain values: roles, operations, informed consents and PPAs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from datetime import date

from .conditions import Condition


class RoleCode(str, enum.Enum):
    DOC = "DOC"
    NRS = "NRS"
    STF = "STF"
    BLO = "BLO"
    RLT = "RLT"
    PLT = "PLT"
    EMC = "EMC"
    PHR = "PHR"
    INA = "INA"
    PATIENT = "PATIENT"
    EXTERNAL = "EXTERNAL"

    @property
    def is_team_member(self) -> bool:
        return self not in (RoleCode.PATIENT, RoleCode.EXTERNAL)


TEAM_ROLES = frozenset(r for r in RoleCode if r.is_team_member)

ROLE_TITLES = {
    RoleCode.DOC: "Doctor",
    RoleCode.NRS: "Nurse",
    RoleCode.STF: "Support Staff",
    RoleCode.BLO: "Billing Officer",
    RoleCode.RLT: "Radiology Lab Tech",
    RoleCode.PLT: "Pathology Lab Tech",
    RoleCode.EMC: "Emergency Contact",
    RoleCode.PHR: "Pharmacist",
    RoleCode.INA: "Insurance Agent",
    RoleCode.PATIENT: "Patient",
    RoleCode.EXTERNAL: "External User",
}


class OperationKind(str, enum.Enum):
    READ = "Read"
    WRITE = "Write"
    UPDATE = "Update"

    @property
    def mutating(self) -> bool:
        return self is not OperationKind.READ


@dataclass(frozen=True, order=True)
class UserRef:
    """A user identifier qualified by the role it acts under."""

    role: RoleCode
    user_id: str

    def __str__(self) -> str:
        return f"{self.role.value}:{self.user_id}"

    @classmethod
    def parse(cls, text: str) -> "UserRef":
        role, sep, user = text.partition(":")
        if not sep or not user:
            raise ValueError(f"user reference must look like ROLE:user, got {text!r}")
        return cls(RoleCode(role.upper()), user)


@dataclass(frozen=True)
class PhiCatalogEntry:
    phi_id: str
    name: str
    description: str = ""


class ConsentState(str, enum.Enum):
    ACTIVE = "Active"
    ARCHIVED = "Archived"


class ArchiveReasonKind(str, enum.Enum):
    ALTERED = "Altered"
    TERMINATED = "Terminated"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class InformedConsent:
    """IC = (users, objects, operations, conditions) plus lifecycle status."""

    consent_id: str
    patient_id: str
    users: frozenset[UserRef]
    objects: frozenset[str]
    operations: frozenset[OperationKind]
    conditions: frozenset[Condition] = frozenset()
    state: ConsentState = ConsentState.ACTIVE
    archive_reason: ArchiveReasonKind | None = None
    archived_at: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", frozenset(self.users))
        object.__setattr__(self, "objects", frozenset(self.objects))
        object.__setattr__(self, "operations", frozenset(OperationKind(o) for o in self.operations))
        object.__setattr__(self, "conditions", frozenset(self.conditions))

    @property
    def active(self) -> bool:
        return self.state is ConsentState.ACTIVE

    def archived(self, reason: ArchiveReasonKind, at: int) -> "InformedConsent":
        if not self.active:
            raise ValueError(f"consent {self.consent_id} is already archived")
        return replace(self, state=ConsentState.ARCHIVED, archive_reason=reason, archived_at=at)

    def triples(self):
        """Every (user, object, operation) grant this consent carries."""
        for u in sorted(self.users):
            for o in sorted(self.objects):
                for op in sorted(self.operations, key=lambda k: k.value):
                    yield u, o, op

    def covers(self, user: UserRef, phi_id: str, op: OperationKind) -> bool:
        return user in self.users and phi_id in self.objects and op in self.operations

    def sorted_conditions(self) -> list[Condition]:
        return sorted(self.conditions, key=lambda c: c.label)


@dataclass(frozen=True)
class Ppa:
    """Patient-provider agreement: (PC, PrC, ROC, ICC) with validity window."""

    ppa_id: str
    patient_id: str
    pc: tuple[str, ...]
    prc: tuple[str, ...]
    roc: tuple[str, ...]
    icc: tuple[InformedConsent, ...]
    validity_end: date | None = None

    def __post_init__(self) -> None:
        for name in ("pc", "prc", "roc", "icc"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def complete(self) -> bool:
        return all((self.pc, self.prc, self.roc, self.icc))


@dataclass(frozen=True)
class PpaIntegrity:
    h_pc: bytes
    h_prc: bytes
    h_roc: bytes
    h_icc: bytes
    h_ppa: bytes = field(default=b"")

    def hex(self) -> str:
        return self.h_ppa.hex()
