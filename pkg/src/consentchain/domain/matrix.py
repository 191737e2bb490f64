"""PHI catalog, the role/PHI/operation permission matrix, and consent validation."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import UnknownPhi
from .types import InformedConsent, OperationKind, PhiCatalogEntry, RoleCode

FIXTURE_ENV = "CONSENTCHAIN_FIXTURES"
CATALOG_FILE = "phi_catalog.json"
MATRIX_FILE = "permission_matrix.json"


def _fixture_text(name: str) -> str:
    override = os.environ.get(FIXTURE_ENV)
    if override and (Path(override) / name).exists():
        return (Path(override) / name).read_text(encoding="utf-8")
    return resources.files("consentchain.data").joinpath(name).read_text(encoding="utf-8")


class PhiCatalog(Mapping[str, PhiCatalogEntry]):
    def __init__(self, entries: Iterable[PhiCatalogEntry]) -> None:
        self._entries: dict[str, PhiCatalogEntry] = {}
        for e in entries:
            if e.phi_id in self._entries:
                raise ValueError(f"duplicate phi_id {e.phi_id}")
            self._entries[e.phi_id] = e

    @classmethod
    def from_file(cls, path: str | Path) -> "PhiCatalog":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_json(cls, text: str) -> "PhiCatalog":
        return cls(PhiCatalogEntry(**row) for row in json.loads(text))

    def __getitem__(self, phi_id: str) -> PhiCatalogEntry:
        return self._entries[phi_id]

    def __iter__(self):
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def resolve(self, key: str) -> str:
        """Map a phi_id or display name to its phi_id."""
        if key in self._entries:
            return key
        for e in self._entries.values():
            if e.name.casefold() == key.casefold():
                return e.phi_id
        raise UnknownPhi(key)


class PermissionMatrix:
    """Which roles may perform which operation on which PHI item."""

    def __init__(self, cells: Mapping[str, Mapping[str, Iterable[str]]]) -> None:
        self._cells: dict[tuple[str, OperationKind], frozenset[RoleCode]] = {}
        for phi_id, row in cells.items():
            for op in OperationKind:
                roles = row.get(op.value, ())
                self._cells[(phi_id, op)] = frozenset(RoleCode(r.upper()) for r in roles)
        self.phi_ids = frozenset(cells)

    @classmethod
    def from_file(cls, path: str | Path) -> "PermissionMatrix":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def permits(self, role: RoleCode, phi_id: str, op: OperationKind) -> bool:
        if phi_id not in self.phi_ids:
            raise UnknownPhi(phi_id)
        return RoleCode(role) in self._cells[(phi_id, OperationKind(op))]

    def roles_for(self, phi_id: str, op: OperationKind) -> frozenset[RoleCode]:
        if phi_id not in self.phi_ids:
            raise UnknownPhi(phi_id)
        return self._cells[(phi_id, OperationKind(op))]


@lru_cache(maxsize=None)
def default_catalog() -> PhiCatalog:
    return PhiCatalog.from_json(_fixture_text(CATALOG_FILE))


@lru_cache(maxsize=None)
def default_matrix() -> PermissionMatrix:
    return PermissionMatrix(json.loads(_fixture_text(MATRIX_FILE)))


def matrix_permits(role: RoleCode, phi_id: str, op: OperationKind,
                   matrix: PermissionMatrix | None = None) -> bool:
    return (matrix or default_matrix()).permits(role, phi_id, op)


@dataclass(frozen=True)
class Finding:
    code: str
    detail: str


def validate_consent(ic: InformedConsent, catalog: PhiCatalog | None = None,
                     matrix: PermissionMatrix | None = None) -> list[Finding]:
    catalog = catalog or default_catalog()
    matrix = matrix or default_matrix()
    findings: list[Finding] = []
    if not ic.consent_id:
        findings.append(Finding("MissingConsentId", "consent_id is empty"))
    if not ic.users:
        findings.append(Finding("EmptyUserSet", "no users named"))
    if not ic.objects:
        findings.append(Finding("EmptyObjectSet", "no PHI objects named"))
    if not ic.operations:
        findings.append(Finding("EmptyOperationSet", "no operations named"))
    if not ic.active:
        findings.append(Finding("NotActive", f"consent is {ic.state.value}"))
    for u in sorted(ic.users):
        if u.role is RoleCode.EXTERNAL:
            findings.append(Finding("ExternalUser", f"{u} is not a treatment team member"))
    for phi in sorted(ic.objects):
        if phi not in catalog:
            findings.append(Finding("UnknownPhi", f"{phi} is not in the catalog"))
    for user, phi, op in ic.triples():
        if phi in catalog and phi in matrix.phi_ids and not matrix.permits(user.role, phi, op):
            findings.append(Finding("MatrixViolation", f"{user} may not {op.value} {phi}"))
    return findings
