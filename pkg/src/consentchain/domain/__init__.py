from .conditions import (
    AccessFrequency,
    CalendarExpiry,
    Condition,
    ConditionResult,
    DayOfWeek,
    GeoFence,
    IpAllowlist,
    RequestContext,
    TimeWindow,
    Verdict,
    evaluate_condition,
)
from .encoding import canonical_encode, digest, hash_ppa
from .matrix import (
    Finding,
    PermissionMatrix,
    PhiCatalog,
    default_catalog,
    default_matrix,
    matrix_permits,
    validate_consent,
)
from .types import (
    ArchiveReasonKind,
    ConsentState,
    InformedConsent,
    OperationKind,
    PhiCatalogEntry,
    Ppa,
    PpaIntegrity,
    RoleCode,
    TEAM_ROLES,
    UserRef,
)

__all__ = [
    "AccessFrequency", "CalendarExpiry", "Condition", "ConditionResult", "DayOfWeek",
    "GeoFence", "IpAllowlist", "RequestContext", "TimeWindow", "Verdict", "evaluate_condition",
    "canonical_encode", "digest", "hash_ppa",
    "Finding", "PermissionMatrix", "PhiCatalog", "default_catalog", "default_matrix",
    "matrix_permits", "validate_consent",
    "ArchiveReasonKind", "ConsentState", "InformedConsent", "OperationKind", "PhiCatalogEntry",
    "Ppa", "PpaIntegrity", "RoleCode", "TEAM_ROLES", "UserRef",
]
