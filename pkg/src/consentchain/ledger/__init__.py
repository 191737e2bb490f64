from .chain import (
    Block,
    ChainStatus,
    EventKind,
    EventRecord,
    Execution,
    Ledger,
    Receipt,
    Transaction,
    TxStatus,
    encode_args,
    verify_blocks,
)
from .config import PROFILES, ChainConfig, profile_config
from .gas import DEFAULT_SCHEDULE, GasSchedule, estimate_gas

__all__ = [
    "Block", "ChainStatus", "EventKind", "EventRecord", "Execution", "Ledger", "Receipt",
    "Transaction", "TxStatus", "encode_args", "verify_blocks",
    "PROFILES", "ChainConfig", "profile_config",
    "DEFAULT_SCHEDULE", "GasSchedule", "estimate_gas",
]
