from dataclasses import replace
from datetime import date, datetime

import pytest

from consentchain.contract import ConsentService, detect_conflicts
from consentchain.domain.conditions import AccessFrequency, CalendarExpiry
from consentchain.domain.types import ArchiveReasonKind, OperationKind, RoleCode, UserRef
from consentchain.errors import (
    ConsentConflict,
    DuplicateConsentId,
    DuplicateContainer,
    UnknownConsent,
    UnknownPatient,
    ValidationFailed,
)
from consentchain.fixtures import DAVID, JORDAN, NINA, consent, jordan_consents, jordan_ppa
from consentchain.ledger.chain import EventKind

from conftest import make_service


@pytest.fixture
def jordan(service):
    ppa_id, _ = service.create_ppa(jordan_ppa())
    service.deploy_consents(ppa_id)
    return service


def kinds(svc, cid):
    return [e.kind.value for e in svc.ledger.events(consent_id=cid)]


def test_deploy_puts_all_consents_in_repository(jordan):
    view = jordan.container(JORDAN)
    assert sorted(view.repository) == sorted(ic.consent_id for ic in jordan_consents())
    assert not view.archive
    assert len(jordan.ledger.events(EventKind.CONSENT_CREATED)) == 6


def test_create_conflicts(jordan):
    dup = consent("dup", JORDAN, DAVID, ["PHI1005"], ["Read"])
    with pytest.raises(ConsentConflict) as exc:
        jordan.create_consent(JORDAN, dup)
    assert exc.value.report.codes == {"DuplicateGrant"}
    with pytest.raises(ValidationFailed):
        jordan.create_consent(JORDAN, consent("mv", JORDAN, NINA, ["PHI1005"], ["Write"]))
    with pytest.raises(DuplicateConsentId):
        jordan.create_consent(JORDAN, consent("jd-01", JORDAN, NINA, ["PHI1006"], ["Read"]))
    with pytest.raises(UnknownPatient):
        jordan.create_consent("nobody", consent("x", "nobody", NINA, ["PHI1006"], ["Read"]))
    height = jordan.ledger.height
    ok = consent("jn-02", JORDAN, NINA, ["PHI1006"], ["Read"])
    assert jordan.create_consent(JORDAN, ok) == "jn-02"
    assert jordan.ledger.height == height + 1


def test_failed_call_leaves_no_trace(jordan):
    before = jordan.container(JORDAN).state_digest()
    height = jordan.ledger.height
    with pytest.raises(ConsentConflict):
        jordan.terminate_consent("jn-01")  # the only nurse consent
    assert jordan.container(JORDAN).state_digest() == before
    assert jordan.ledger.height == height and not jordan.ledger.pending


def test_alter_archives_old_and_adds_new(jordan):
    new = consent("jd-01b", JORDAN, DAVID, ["PHI1005"], ["Read", "Write"])
    jordan.alter_consent("jd-01", new)
    view = jordan.container(JORDAN)
    assert "jd-01" not in view.repository and "jd-01b" in view.repository
    entry = view.archive["jd-01"]
    assert entry.reason is ArchiveReasonKind.ALTERED and entry.replaced_by == "jd-01b"
    assert kinds(jordan, "jd-01") == ["ConsentCreated", "ConsentAltered", "ConsentArchived"]
    with pytest.raises(UnknownConsent):
        jordan.alter_consent("jd-01", replace(new, consent_id="jd-01c"))


def test_alter_stage_two_conflict(jordan):
    clash = consent("jd-01b", JORDAN, DAVID, ["PHI1006"], ["Read"])  # duplicates jd-02
    with pytest.raises(ConsentConflict) as exc:
        jordan.alter_consent("jd-01", clash)
    assert exc.value.report.codes == {"DuplicateGrant"}


def test_terminate(jordan):
    jordan.terminate_consent("jd-05")
    view = jordan.container(JORDAN)
    assert view.archive["jd-05"].reason is ArchiveReasonKind.TERMINATED
    assert kinds(jordan, "jd-05") == ["ConsentCreated", "ConsentTerminated", "ConsentArchived"]
    with pytest.raises(UnknownConsent):
        jordan.terminate_consent("jd-05")
    with pytest.raises(UnknownConsent):
        jordan.terminate_consent("never")


def test_calendar_expiry_sweep(jordan):
    assert jordan.expire_sweep(datetime(2024, 6, 30, 23, 0)) == []
    assert jordan.expire_sweep(datetime(2024, 7, 1, 0, 0)) == ["jd-03"]
    entry = jordan.container(JORDAN).archive["jd-03"]
    assert entry.reason is ArchiveReasonKind.EXPIRED
    assert entry.violated == CalendarExpiry(date(2024, 6, 30))
    assert kinds(jordan, "jd-03") == ["ConsentCreated", "ConsentExpired", "ConsentArchived"]


def test_auto_sweep_runs_on_seal():
    svc = make_service()
    svc.create_ppa(jordan_ppa())
    svc.deploy_consents("ppa-jordan")
    svc.advance_clock(datetime(2024, 7, 2))
    svc.create_consent(JORDAN, consent("jn-02", JORDAN, NINA, ["PHI1006"], ["Read"]))
    assert "jd-03" in svc.container(JORDAN).archive


def test_sweep_skips_consent_needed_by_team():
    svc = make_service()
    only_nurse = consent("n", "p", NINA, ["PHI1004"], ["Read"], [CalendarExpiry(date(2024, 6, 30))])
    doc = consent("d", "p", DAVID, ["PHI1005"], ["Read"])
    svc.deploy_container("p", seed=[only_nurse, doc])
    assert svc.expire_sweep(datetime(2024, 7, 5)) == []
    assert "n" in svc.container("p").repository


def test_duplicate_container(service):
    service.deploy_container("p", required_roles=())
    with pytest.raises(DuplicateContainer):
        service.deploy_container("p")


def test_manual_archive(jordan):
    jordan.archive_consent("jd-02", "Expired", violated=AccessFrequency(5))
    assert jordan.container(JORDAN).archive["jd-02"].violated == AccessFrequency(5)


def test_export_is_canonical(jordan):
    a = jordan.container(JORDAN)
    exported = a.export()
    assert [c["consent_id"] for c in exported["repository"]] == sorted(a.repository)
    assert exported["required_roles"] == ["DOC", "NRS"]
    assert len(a.state_digest()) == 64


def test_detect_conflicts_rules():
    d = consent("a", "p", DAVID, ["PHI1005"], ["Read"])
    assert detect_conflicts([d]).codes == {"IncompleteTeam"}
    assert detect_conflicts([d], required_roles=()).ok
    bad = consent("b", "p", UserRef(RoleCode.STF, "s"), ["PHI1005"], ["Read"])
    assert detect_conflicts([d, bad], ()).codes == {"MatrixViolation"}
    assert detect_conflicts([d, replace(d, consent_id="c")], ()).codes == {"DuplicateGrant"}
    assert "no conflicts" == detect_conflicts([], ()).describe()


def test_unknown_phi_counts_as_violation():
    weird = replace(consent("a", "p", DAVID, ["PHI1005"], ["Read"]), objects=frozenset({"PHI0000"}))
    assert detect_conflicts([weird], ()).codes == {"MatrixViolation"}


def test_service_defaults():
    svc = ConsentService()
    assert svc.required_roles == {RoleCode.DOC, RoleCode.NRS}
    assert svc.auto_sweep
    assert OperationKind.READ.mutating is False


def test_admin_call_sees_pending_expiry(jordan):
    jordan.advance_clock(datetime(2024, 7, 1, 9, 0))
    with pytest.raises(UnknownConsent):
        jordan.terminate_consent("jd-03")
    assert jordan.container(JORDAN).archive["jd-03"].reason is ArchiveReasonKind.EXPIRED
    statuses = {tx.status.value for b in jordan.ledger.blocks for tx in b.transactions}
    assert statuses == {"Success"}
