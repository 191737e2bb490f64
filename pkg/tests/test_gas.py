import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from consentchain.domain.encoding import canonical_encode, consent_slots
from consentchain.fixtures import jordan_consents
from consentchain.ledger.chain import TxStatus
from consentchain.ledger.gas import DEFAULT_SCHEDULE, GasSchedule, estimate_gas
from oracles import gas as oracle

from conftest import make_service


@pytest.mark.parametrize("payload,new,upd,code,expected", [
    (bytes([1]) * 36, 1, 0, None, 41576),   # 36 nonzero calldata bytes, one fresh slot
    (b"", 0, 0, None, 21000),                 # bare transaction
    (b"", 0, 0, 2000, 453000),                # 2000-byte contract deployment
])
def test_documented_cases(payload, new, upd, code, expected):
    assert oracle.gas(payload, new, upd, code) == expected
    got = DEFAULT_SCHEDULE.estimate(payload, new, upd, code is not None, code or 0)
    assert got == expected


@given(st.binary(max_size=300), st.integers(0, 20), st.integers(0, 20))
def test_schedule_agrees_with_hand_formula(payload, new, upd):
    assert DEFAULT_SCHEDULE.estimate(payload, new, upd) == oracle.gas(payload, new, upd)


def test_estimate_gas_update_rate():
    assert estimate_gas(b"", 2, slot_update=True) == 21000 + 2 * 5000
    assert estimate_gas(b"\x00\x00", 1) == 21000 + 8 + 20000


def test_schedule_rejects_nonpositive_entries():
    with pytest.raises(ValueError):
        GasSchedule(tx_base=0)
    with pytest.raises(ValueError):
        DEFAULT_SCHEDULE.estimate(b"", -1)


def test_consent_slot_count():
    ic = jordan_consents()[0]
    assert consent_slots(ic) == math.ceil(len(canonical_encode(ic)) / 32)


def test_ledger_charges_create_by_formula():
    svc = make_service(required_roles=())
    svc.deploy_container("p")
    ic = jordan_consents()[0]
    ic = replace(ic, patient_id="p")
    svc.create_consent("p", ic)
    tx = svc.ledger.blocks[-1].transactions[-1]
    assert tx.status is TxStatus.SUCCESS and tx.call == "create_consent"
    assert tx.gas_used == oracle.gas(tx.calldata, new_slots=consent_slots(ic))


def test_container_deploy_and_reads_cost():
    svc = make_service(required_roles=())
    svc.deploy_container("p")
    tx = svc.ledger.blocks[-1].transactions[0]
    assert tx.gas_used == oracle.gas(tx.calldata, new_slots=1, deploy_code=2000)
    before = svc.ledger.height
    svc.container("p").active()
    svc.ledger.events(patient_id="p")
    assert svc.ledger.height == before  # reads never touch the chain
