"""On-disk workspace for the administration subcommands.

The chain dump is the source of truth: contract state is rebuilt by
re-executing every successful transaction in block order. PPAs live off
chain in ``ppas.json`` alongside it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from ..authorization import Authorizer
from ..clock import LogicalClock, from_ms
from ..contract.service import ConsentService
from ..domain.serialize import ppa_from_dict, ppa_to_dict
from ..errors import ChainFormatError
from ..ledger.chain import Ledger, TxStatus
from ..ledger.config import ChainConfig

CHAIN_FILE = "chain.jsonl"
PPA_FILE = "ppas.json"
CONFIG_FILE = "config.json"


def replay_contracts(service: ConsentService) -> None:
    """Re-run sealed transactions against fresh contracts; the ledger itself is not touched."""
    for block in service.ledger.blocks[1:]:
        for tx in block.transactions:
            if tx.status is TxStatus.SUCCESS:
                service.ledger.contract(tx.target).execute(tx, block.height, block.timestamp)


@dataclass
class Workspace:
    root: Path
    service: ConsentService
    config: ChainConfig

    @property
    def authorizer(self) -> Authorizer:
        return Authorizer(self.service)

    @classmethod
    def open(cls, root: str | Path, config: ChainConfig | None = None, at: datetime | None = None,
             auto_sweep: bool = True) -> "Workspace":
        root = Path(root)
        saved = root / CONFIG_FILE
        if config is None:
            config = ChainConfig.from_file(saved) if saved.exists() else ChainConfig()
        chain = root / CHAIN_FILE
        if chain.exists():
            ledger = Ledger.restore(chain.read_text(encoding="utf-8"), config)
            status = ledger.verify_chain()
            if not status.valid:
                raise ChainFormatError(f"refusing to load a chain that verifies as {status}")
            clock = LogicalClock(from_ms(ledger.blocks[-1].timestamp))
            service = ConsentService(ledger, clock=clock, auto_sweep=auto_sweep)
            replay_contracts(service)
        else:
            clock = LogicalClock(at) if at is not None else LogicalClock()
            service = ConsentService(Ledger(config, genesis_time=clock.now_ms()), clock=clock,
                                     auto_sweep=auto_sweep)
        ppas = root / PPA_FILE
        if ppas.exists():
            data = json.loads(ppas.read_text(encoding="utf-8"))
            reg = service.registry
            reg.store = {k: ppa_from_dict(v) for k, v in data["store"].items()}
            reg.profiles = {k: list(v) for k, v in data["profiles"].items()}
            reg.tampered = set(data["tampered"])
            reg.deployed = set(data["deployed"])
        if at is not None:
            service.advance_clock(at)
        return cls(root, service, config)

    def save(self) -> None:
        self.service.flush()
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / CHAIN_FILE).write_text(self.service.ledger.dump(), encoding="utf-8")
        (self.root / CONFIG_FILE).write_text(json.dumps(self.config.to_dict(), indent=1, sort_keys=True) + "\n",
                                             encoding="utf-8")
        reg = self.service.registry
        data = {
            "store": {k: ppa_to_dict(v) for k, v in sorted(reg.store.items())},
            "profiles": {k: v for k, v in sorted(reg.profiles.items())},
            "tampered": sorted(reg.tampered),
            "deployed": sorted(reg.deployed),
        }
        (self.root / PPA_FILE).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")
