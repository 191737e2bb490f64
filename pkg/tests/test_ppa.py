from dataclasses import replace

import pytest

from consentchain.contract import Integrity
from consentchain.errors import DuplicatePpaId, IncompletePpa, PpaConflict, TamperedPpa, UnknownPpa
from consentchain.fixtures import DAVID, JORDAN, consent, jordan_ppa
from consentchain.ledger.chain import EventKind


def test_create_stores_digest_only(service):
    ppa_id, integrity = service.create_ppa(jordan_ppa())
    ev, = service.ledger.events(EventKind.PPA_INTEGRITY_STORED)
    assert ev.payload == {"ppa_id": ppa_id, "patient_id": JORDAN, "h_ppa": integrity.hex()}
    assert service.ppa_contract.digest_for(ppa_id) == integrity.hex()
    assert service.registry.profile(JORDAN) == [ppa_id]
    assert service.verify_ppa_integrity(ppa_id) is Integrity.INTACT


def test_duplicate_and_unknown(service):
    service.create_ppa(jordan_ppa())
    with pytest.raises(DuplicatePpaId):
        service.create_ppa(jordan_ppa())
    with pytest.raises(UnknownPpa):
        service.verify_ppa_integrity("nope")
    with pytest.raises(UnknownPpa):
        service.deploy_consents("nope")


def test_incomplete_ppa_never_reaches_chain(service):
    with pytest.raises(IncompletePpa):
        service.create_ppa(replace(jordan_ppa(), roc=()))
    assert service.ledger.height == 0


def test_conflicting_ppa_needs_revision(service):
    extra = consent("jd-99", JORDAN, DAVID, ["PHI1005"], ["Read"])
    ppa = replace(jordan_ppa(), icc=jordan_ppa().icc + (extra,))
    with pytest.raises(PpaConflict) as exc:
        service.create_ppa(ppa)
    assert "DuplicateGrant" in exc.value.report.codes
    assert service.ppa_contract.digest_for(ppa.ppa_id) is None


def test_tampered_store_blocks_deploy(service):
    ppa_id, _ = service.create_ppa(jordan_ppa())
    service.registry.store[ppa_id] = replace(jordan_ppa(), roc=("HIPAA",))
    with pytest.raises(TamperedPpa):
        service.deploy_consents(ppa_id)
    assert not service.has_container(JORDAN)
    # restoring the document does not clear the flag
    service.registry.store[ppa_id] = jordan_ppa()
    with pytest.raises(TamperedPpa):
        service.deploy_consents(ppa_id)


def test_verify_against_supplied_document(service):
    ppa_id, _ = service.create_ppa(jordan_ppa())
    assert service.verify_ppa_integrity(ppa_id, replace(jordan_ppa(), validity_end=None)) is Integrity.INTACT
    assert service.verify_ppa_integrity(ppa_id, replace(jordan_ppa(), pc=())) is Integrity.TAMPERED
