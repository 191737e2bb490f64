"""Ready-made consent sets used by tests, scenarios and the bench harness."""

from __future__ import annotations

from datetime import date

from .domain.conditions import AccessFrequency, CalendarExpiry, DayOfWeek, TimeWindow
from .domain.matrix import PermissionMatrix, default_catalog, default_matrix
from .domain.types import InformedConsent, OperationKind, Ppa, RoleCode, UserRef

JORDAN = "jordan"
DAVID = UserRef(RoleCode.DOC, "david")
NINA = UserRef(RoleCode.NRS, "nina")

# labels used in the user-oriented figure, mapped to catalog ids
FIGURE_RESOURCES = {
    "Visit Notes": "PHI1005",
    "Prescription": "PHI1006",
    "Radiology Lab Report": "PHI1008",
    "Pathology Lab Report": "PHI1007",
    "Immunization History": "PHI1003",
}

T3_PATIENT = "table3-patient"


def subject_for(role: RoleCode) -> UserRef:
    """The single user who acts under ``role`` in the Table 3 fixture."""
    return UserRef(role, f"{role.value.lower()}-1")


def consent(consent_id: str, patient_id: str, user: UserRef, objects, operations, conditions=()) -> InformedConsent:
    return InformedConsent(consent_id, patient_id, frozenset({user}), frozenset(objects),
                           frozenset(OperationKind(o) for o in operations), frozenset(conditions))


def jordan_consents() -> tuple[InformedConsent, ...]:
    """Jordan grants David read access to five resources, plus a nurse consent to complete the team."""
    read = [OperationKind.READ]
    return (
        consent("jd-01", JORDAN, DAVID, ["PHI1005"], read, [TimeWindow(8 * 60, 17 * 60)]),
        consent("jd-02", JORDAN, DAVID, ["PHI1006"], read, [AccessFrequency(5)]),
        consent("jd-03", JORDAN, DAVID, ["PHI1008"], read, [CalendarExpiry(date(2024, 6, 30))]),
        consent("jd-04", JORDAN, DAVID, ["PHI1007"], read, [DayOfWeek(frozenset({"MON", "TUE", "WED", "THU", "FRI"}))]),
        consent("jd-05", JORDAN, DAVID, ["PHI1003"], read),
        consent("jn-01", JORDAN, NINA, ["PHI1004"], read),
    )


def jordan_ppa(ppa_id: str = "ppa-jordan") -> Ppa:
    return Ppa(ppa_id, JORDAN, pc=("patient:jordan",), prc=("provider:general-hospital", "doctor:david"),
               roc=("HIPAA", "state-privacy-act"), icc=jordan_consents())


def table3_consents(patient_id: str = T3_PATIENT, matrix: PermissionMatrix | None = None) -> tuple[InformedConsent, ...]:
    """One unconditioned consent per (role, PHI) carrying every operation the matrix allows."""
    matrix = matrix or default_matrix()
    out = []
    for role in RoleCode:
        for phi in sorted(default_catalog()):
            ops = [op for op in OperationKind if matrix.permits(role, phi, op)]
            if ops and role is not RoleCode.EXTERNAL:
                out.append(consent(f"t3-{role.value}-{phi}", patient_id, subject_for(role), [phi], ops))
    return tuple(out)


def table3_ppa(ppa_id: str = "ppa-table3", patient_id: str = T3_PATIENT) -> Ppa:
    return Ppa(ppa_id, patient_id, pc=(f"patient:{patient_id}",), prc=("provider:general-hospital",),
               roc=("HIPAA",), icc=table3_consents(patient_id))
