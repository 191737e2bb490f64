"""Chain configuration and named chain profiles."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from .gas import GasSchedule

# 12 s mainnet-style blocks shrunk to desk scale.
DEFAULT_TIME_SCALE = 1 / 120
MAINNET_BLOCK_SECONDS = 12.0


@dataclass(frozen=True)
class ChainConfig:
    block_interval_ms: int = 100
    gas_schedule: GasSchedule = field(default_factory=GasSchedule)
    chain_name: str = "desk"
    # Only used when reporting fees; gas itself is never paid.
    gas_price_multiplier: float = 1.0

    def __post_init__(self) -> None:
        if self.block_interval_ms <= 0:
            raise ValueError("block_interval_ms must be positive")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ChainConfig":
        data = dict(data)
        profile = data.pop("profile", None)
        base = profile_config(profile) if profile else cls()
        schedule = data.pop("gas_schedule", None)
        if schedule is not None:
            base = replace(base, gas_schedule=GasSchedule(**{**asdict(base.gas_schedule), **schedule}))
        unknown = set(data) - {"block_interval_ms", "chain_name", "gas_price_multiplier"}
        if unknown:
            raise ValueError(f"unknown chain config keys: {sorted(unknown)}")
        return replace(base, **data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ChainConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ChainProfile:
    name: str
    block_seconds: float
    gas_price_multiplier: float

    def config(self, scale: float = DEFAULT_TIME_SCALE) -> ChainConfig:
        interval = max(1, round(self.block_seconds * 1000 * scale))
        return ChainConfig(block_interval_ms=interval, chain_name=self.name,
                           gas_price_multiplier=self.gas_price_multiplier)


# Illustrative magnitudes only: the profiles differ in block interval and the
# price multiplier used for fee reporting, nothing else.
PROFILES: dict[str, ChainProfile] = {
    p.name: p
    for p in (
        ChainProfile("desk", MAINNET_BLOCK_SECONDS, 1.0),
        ChainProfile("polygon-like", MAINNET_BLOCK_SECONDS, 1.0),
        ChainProfile("optimism-like", 14.0, 2.0),
        ChainProfile("arbitrum-like", 6.0, 10.0),
    )
}


def profile_config(name: str, scale: float = DEFAULT_TIME_SCALE) -> ChainConfig:
    try:
        return PROFILES[name].config(scale)
    except KeyError:
        raise ValueError(f"unknown chain profile {name!r}; choose from {sorted(PROFILES)}") from None
