"""Gas worked out by hand from the default schedule, kept apart from the package."""

TX_BASE = 21000
NONZERO_BYTE = 16
ZERO_BYTE = 4
SLOT_NEW = 20000
SLOT_UPDATE = 5000
DEPLOY_BASE = 32000
CODE_BYTE = 200


def gas(payload: bytes, new_slots: int = 0, updated_slots: int = 0, deploy_code: int | None = None) -> int:
    total = TX_BASE
    for b in payload:
        total += NONZERO_BYTE if b else ZERO_BYTE
    total += new_slots * SLOT_NEW + updated_slots * SLOT_UPDATE
    if deploy_code is not None:
        total += DEPLOY_BASE + deploy_code * CODE_BYTE
    return total
