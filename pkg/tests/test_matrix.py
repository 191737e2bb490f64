import pytest

from consentchain.domain.matrix import PhiCatalog, default_catalog, default_matrix, validate_consent
from consentchain.domain.types import InformedConsent, OperationKind, RoleCode, UserRef
from consentchain.errors import UnknownPhi
from oracles import table3


def test_matrix_equals_role_major_transcription():
    m = default_matrix()
    shipped = {(r.value, phi, op.value) for r in RoleCode for phi in table3.PHIS for op in OperationKind
               if m.permits(r, phi, op)}
    assert shipped == table3.ALLOWED
    assert len(table3.ALLOWED) == 66


def test_external_users_are_never_permitted():
    m = default_matrix()
    assert not any(m.permits(RoleCode.EXTERNAL, p, o) for p in table3.PHIS for o in OperationKind)


def test_catalog_has_ten_items_and_resolves_names():
    cat = default_catalog()
    assert list(cat) == list(table3.PHIS)
    assert cat.resolve("visit notes") == "PHI1005"
    assert cat.resolve("PHI1008") == "PHI1008"
    with pytest.raises(UnknownPhi):
        cat.resolve("PHI9999")


def test_unknown_phi_in_matrix():
    with pytest.raises(UnknownPhi):
        default_matrix().permits(RoleCode.DOC, "PHI0000", OperationKind.READ)


def test_duplicate_catalog_entry_rejected():
    with pytest.raises(ValueError):
        PhiCatalog.from_json('[{"phi_id": "A", "name": "x"}, {"phi_id": "A", "name": "y"}]')


def test_validate_consent_findings():
    ic = InformedConsent("c", "p", {UserRef(RoleCode.EXTERNAL, "e"), UserRef(RoleCode.NRS, "n")},
                         {"PHI1005", "PHI0000"}, {OperationKind.WRITE})
    codes = {f.code for f in validate_consent(ic)}
    assert codes == {"ExternalUser", "UnknownPhi", "MatrixViolation"}
    empty = InformedConsent("", "p", set(), set(), set())
    assert {f.code for f in validate_consent(empty)} >= {"MissingConsentId", "EmptyUserSet",
                                                          "EmptyObjectSet", "EmptyOperationSet"}
