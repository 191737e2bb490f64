"""Per-patient consent container: active repository plus read-only archive."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

from ..domain.serialize import condition_to_dict, consent_to_dict
from ..domain.conditions import Condition
from ..domain.types import ArchiveReasonKind, InformedConsent, RoleCode
from .conflicts import DEFAULT_REQUIRED_ROLES


@dataclass(frozen=True)
class ArchiveEntry:
    consent: InformedConsent
    reason: ArchiveReasonKind
    archived_at: int
    tx_id: str
    replaced_by: str | None = None
    violated: Condition | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "consent": consent_to_dict(self.consent),
            "reason": self.reason.value,
            "replaced_by": self.replaced_by,
            "violated": condition_to_dict(self.violated) if self.violated else None,
            "archived_at": self.archived_at,
            "tx_id": self.tx_id,
        }


@dataclass
class ConsentContainer:
    patient_id: str
    required_roles: frozenset[RoleCode] = DEFAULT_REQUIRED_ROLES
    repository: dict[str, InformedConsent] = field(default_factory=dict)
    archive: dict[str, ArchiveEntry] = field(default_factory=dict)

    def snapshot(self) -> "ContainerView":
        return ContainerView(self.patient_id, self.required_roles,
                             MappingProxyType(dict(self.repository)), MappingProxyType(dict(self.archive)))

    def active(self) -> list[InformedConsent]:
        return [self.repository[k] for k in sorted(self.repository)]

    def export(self) -> dict[str, Any]:
        return {
            "patient_id": self.patient_id,
            "required_roles": sorted(r.value for r in self.required_roles),
            "repository": [consent_to_dict(self.repository[k]) for k in sorted(self.repository)],
            "archive": [self.archive[k].to_dict() for k in sorted(self.archive)],
        }

    def export_json(self) -> str:
        return json.dumps(self.export(), sort_keys=True, separators=(",", ":"))

    def state_digest(self) -> str:
        return hashlib.sha256(self.export_json().encode()).hexdigest()


@dataclass(frozen=True)
class ContainerView:
    """Read-only snapshot handed to readers."""

    patient_id: str
    required_roles: frozenset[RoleCode]
    repository: Mapping[str, InformedConsent]
    archive: Mapping[str, ArchiveEntry]

    def active(self) -> list[InformedConsent]:
        return [self.repository[k] for k in sorted(self.repository)]

    def export(self) -> dict[str, Any]:
        return ConsentContainer(self.patient_id, self.required_roles,
                                dict(self.repository), dict(self.archive)).export()

    def state_digest(self) -> str:
        return ConsentContainer(self.patient_id, self.required_roles,
                                dict(self.repository), dict(self.archive)).state_digest()
