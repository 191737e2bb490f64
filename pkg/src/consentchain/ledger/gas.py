"""Deterministic gas schedule for ledger writes. Reads are never charged."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class GasSchedule:
    tx_base: int = 21000
    calldata_nonzero_byte: int = 16
    calldata_zero_byte: int = 4
    storage_slot_new: int = 20000
    storage_slot_update: int = 5000
    contract_deploy_base: int = 32000
    contract_code_byte: int = 200

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"gas schedule entry {f.name} must be a positive integer")

    def calldata_cost(self, payload: bytes) -> int:
        zeros = payload.count(0)
        return zeros * self.calldata_zero_byte + (len(payload) - zeros) * self.calldata_nonzero_byte

    def estimate(self, payload: bytes = b"", new_slots: int = 0, updated_slots: int = 0,
                 is_deploy: bool = False, code_size: int = 0) -> int:
        if min(new_slots, updated_slots, code_size) < 0:
            raise ValueError("sizes must be non-negative")
        gas = self.tx_base + self.calldata_cost(payload)
        gas += new_slots * self.storage_slot_new + updated_slots * self.storage_slot_update
        if is_deploy:
            gas += self.contract_deploy_base + code_size * self.contract_code_byte
        return gas


DEFAULT_SCHEDULE = GasSchedule()


def estimate_gas(payload: bytes = b"", slots_written: int = 0, is_deploy: bool = False,
                 code_size: int = 0, *, slot_update: bool = False,
                 schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    """Gas for one call: base + calldata + storage writes (+ deployment terms).

    ``slots_written`` are charged at the first-write rate unless ``slot_update``
    is set, in which case the rewrite rate applies.
    """
    if slot_update:
        return schedule.estimate(payload, 0, slots_written, is_deploy, code_size)
    return schedule.estimate(payload, slots_written, 0, is_deploy, code_size)
