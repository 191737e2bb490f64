"""Conflict rules for a proposed set of active consents.

Three rules, kept together so they can be swapped as a unit:

* DuplicateGrant: one (user, object, operation) triple granted by two entries.
* MatrixViolation: a triple the permission matrix does not allow.
* IncompleteTeam: a required role with no consent granting it anything.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from ..domain.matrix import PermissionMatrix, default_matrix
from ..domain.types import InformedConsent, RoleCode
from ..errors import UnknownPhi

DEFAULT_REQUIRED_ROLES = frozenset({RoleCode.DOC, RoleCode.NRS})


@dataclass(frozen=True)
class ConflictFinding:
    code: str
    detail: str
    implicated: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConflictReport:
    findings: tuple[ConflictFinding, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.findings

    @property
    def codes(self) -> set[str]:
        return {f.code for f in self.findings}

    def describe(self) -> str:
        return "; ".join(f"{f.code}: {f.detail}" for f in self.findings) or "no conflicts"


def detect_conflicts(proposed: Iterable[InformedConsent], required_roles: Iterable[RoleCode] = DEFAULT_REQUIRED_ROLES,
                     matrix: PermissionMatrix | None = None) -> ConflictReport:
    matrix = matrix or default_matrix()
    consents = [ic for ic in proposed if ic.active]
    findings: list[ConflictFinding] = []

    holders: dict[tuple, list[str]] = defaultdict(list)
    for ic in consents:
        for triple in ic.triples():
            holders[triple].append(ic.consent_id)
    for (user, phi, op), ids in sorted(holders.items(), key=lambda kv: (str(kv[0][0]), kv[0][1], kv[0][2].value)):
        if len(ids) > 1:
            findings.append(ConflictFinding(
                "DuplicateGrant", f"{user} {op.value} {phi} granted {len(ids)} times",
                tuple(sorted(set(ids))),
            ))

    for ic in sorted(consents, key=lambda c: c.consent_id):
        for user, phi, op in ic.triples():
            try:
                allowed = matrix.permits(user.role, phi, op)
            except UnknownPhi:
                allowed = False
            if not allowed:
                findings.append(ConflictFinding(
                    "MatrixViolation", f"{user} may not {op.value} {phi}", (ic.consent_id,)
                ))

    granted_roles = {u.role for ic in consents if ic.operations and ic.objects for u in ic.users}
    for role in sorted(set(required_roles), key=lambda r: r.value):
        if role not in granted_roles:
            findings.append(ConflictFinding("IncompleteTeam", f"no active consent grants {role.value}"))

    return ConflictReport(tuple(findings))
