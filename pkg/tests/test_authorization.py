from datetime import datetime

import pytest

from consentchain.authorization import (
    AccessDecision,
    AccessRequest,
    Authorizer,
    DenyCode,
    Outcome,
    export_decisions,
)
from consentchain.domain.conditions import GeoFence, IpAllowlist, RequestContext
from consentchain.domain.types import OperationKind
from consentchain.errors import MissingContextField, UnknownPatient, UnknownPhi
from consentchain.fixtures import DAVID, JORDAN, NINA, consent, jordan_ppa
from consentchain.ledger.chain import EventKind

from conftest import make_service, request


@pytest.fixture
def jordan():
    svc = make_service()
    svc.create_ppa(jordan_ppa())
    svc.deploy_consents("ppa-jordan")
    return svc, Authorizer(svc)


def decide(az, *args, **kw):
    d = az.authorize(request(*args, **kw))
    az.service.flush()
    return d


def test_grant_names_consent_and_is_logged(jordan):
    svc, az = jordan
    d = decide(az, DAVID, JORDAN, "PHI1005", rid="a1")
    assert d.outcome is Outcome.GRANT and d.matched_consent == "jd-01" and d.use_ordinal == 1
    ev, = svc.ledger.events(EventKind.ACCESS_GRANTED)
    assert ev.payload["request_id"] == "a1" and ev.tx_id == d.logged_tx


def test_time_window_denial(jordan):
    _, az = jordan
    d = decide(az, DAVID, JORDAN, "PHI1005", at=datetime(2024, 6, 3, 17, 0))
    assert d.outcome is Outcome.DENY
    assert [str(r) for r in d.reasons] == ["ConditionViolated(TimeWindow(08:00-17:00))"]


def test_no_consent_and_matrix(jordan):
    _, az = jordan
    assert decide(az, NINA, JORDAN, "PHI1006").reason_codes == ["NoConsent"]
    assert decide(az, NINA, JORDAN, "PHI1005", "Write").reason_codes == ["NoConsent", "MatrixViolation"]


def test_catalog_name_resolves(jordan):
    _, az = jordan
    d = decide(az, DAVID, JORDAN, "Visit Notes")
    assert d.granted and d.phi_id == "PHI1005"


def test_unknown_patient_and_phi(jordan):
    _, az = jordan
    with pytest.raises(UnknownPatient):
        az.authorize(request(DAVID, "nobody", "PHI1005"))
    with pytest.raises(UnknownPhi):
        az.authorize(request(DAVID, JORDAN, "PHI0000"))


def test_missing_timestamp_rejected():
    with pytest.raises(MissingContextField):
        AccessRequest("r", DAVID, JORDAN, "PHI1005", OperationKind.READ, RequestContext())


def test_missing_zone_fails_closed():
    svc = make_service(required_roles=())
    svc.deploy_container("p", seed=[
        consent("g", "p", DAVID, ["PHI1005"], ["Read"], [GeoFence(frozenset({"ward"}))]),
        consent("i", "p", DAVID, ["PHI1006"], ["Read"], [IpAllowlist(frozenset({"10.0.0.0/8"}))]),
    ])
    az = Authorizer(svc)
    assert decide(az, DAVID, "p", "PHI1005").reason_codes == ["ConditionViolated"]
    assert decide(az, DAVID, "p", "PHI1005", zone="ward").granted
    assert not decide(az, DAVID, "p", "PHI1006", source_address="11.0.0.1").granted
    assert decide(az, DAVID, "p", "PHI1006", source_address="10.1.1.1").granted


def test_archived_consent_reason(jordan):
    svc, az = jordan
    svc.terminate_consent("jd-05")
    d = decide(az, DAVID, JORDAN, "PHI1003")
    assert d.reason_codes == ["ConsentArchived"] and d.reasons[0].consent_id == "jd-05"


def test_policy_hook_can_deny(jordan):
    svc, _ = jordan
    az = Authorizer(svc, policy_hook=lambda req: req.subject != DAVID)
    assert decide(az, DAVID, JORDAN, "PHI1003").reason_codes == ["PolicyDenied"]
    assert decide(az, NINA, JORDAN, "PHI1004").granted


def test_frequency_counts_sealed_grants(jordan):
    svc, az = jordan
    outcomes = [decide(az, DAVID, JORDAN, "PHI1006", rid=f"f{i}") for i in range(6)]
    assert [d.use_ordinal for d in outcomes[:5]] == [1, 2, 3, 4, 5]
    assert all(d.granted for d in outcomes[:5])
    assert outcomes[5].reason_codes == [DenyCode.FREQUENCY_EXHAUSTED.value]
    assert az.use_count("jd-02") == 5


def test_replay_matches_live(jordan):
    _, az = jordan
    live = [decide(az, DAVID, JORDAN, phi, rid=phi) for phi in ("PHI1005", "PHI1006", "PHI1009")]
    assert az.replay_decisions(JORDAN) == live
    text = export_decisions(live)
    assert len(text.splitlines()) == 3
    assert AccessDecision(**{**live[0].__dict__}) == live[0]


def test_decision_invariants():
    with pytest.raises(ValueError):
        AccessDecision("r", Outcome.DENY, None, (), 0, "tx")
    with pytest.raises(ValueError):
        AccessDecision("r", Outcome.GRANT, None, (), 0, "tx")
