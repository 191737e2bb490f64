"""Consent conditions and their evaluation against a request context."""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass
from datetime import date, datetime
from typing import Union

from ..errors import InvalidCondition, MissingContextField

MINUTES_PER_DAY = 1440
WEEKDAYS = ("MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN")


class Verdict(str, enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    EXHAUSTED = "Exhausted"


@dataclass(frozen=True)
class ConditionResult:
    verdict: Verdict
    reason: str = ""

    @property
    def satisfied(self) -> bool:
        return self.verdict is Verdict.SATISFIED


SATISFIED = ConditionResult(Verdict.SATISFIED)


@dataclass(frozen=True)
class RequestContext:
    """Environment attributes of one access request.

    ``prior_use_count`` is the number of grants already executed under the
    consent being evaluated; callers derive it from sealed ledger events.
    """

    timestamp: datetime | None = None
    zone: str | None = None
    source_address: str | None = None
    prior_use_count: int | None = 0

    def with_use_count(self, count: int) -> "RequestContext":
        return RequestContext(self.timestamp, self.zone, self.source_address, count)


def _require(ctx: RequestContext, field: str):
    value = getattr(ctx, field)
    if value is None:
        raise MissingContextField(field)
    return value


@dataclass(frozen=True)
class TimeWindow:
    """Access allowed on minutes ``[start_minute, end_minute)`` of each day."""

    start_minute: int
    end_minute: int

    kind = "TimeWindow"
    terminal = False

    def __post_init__(self) -> None:
        if not (0 <= self.start_minute < self.end_minute <= MINUTES_PER_DAY):
            raise InvalidCondition(
                f"TimeWindow needs 0 <= start < end <= {MINUTES_PER_DAY}, "
                f"got [{self.start_minute}, {self.end_minute})"
            )

    @property
    def label(self) -> str:
        return f"TimeWindow({_hhmm(self.start_minute)}-{_hhmm(self.end_minute)})"

    def evaluate(self, ctx: RequestContext) -> ConditionResult:
        ts = _require(ctx, "timestamp")
        minute = ts.hour * 60 + ts.minute
        if self.start_minute <= minute < self.end_minute:
            return SATISFIED
        return ConditionResult(Verdict.VIOLATED, f"{ts:%H:%M} outside {self.label}")


@dataclass(frozen=True)
class CalendarExpiry:
    """Access allowed up to and including ``expiry_date``."""

    expiry_date: date

    kind = "CalendarExpiry"
    terminal = True

    def __post_init__(self) -> None:
        if isinstance(self.expiry_date, datetime) or not isinstance(self.expiry_date, date):
            raise InvalidCondition("CalendarExpiry needs a civil date")

    @property
    def label(self) -> str:
        return f"CalendarExpiry({self.expiry_date.isoformat()})"

    def evaluate(self, ctx: RequestContext) -> ConditionResult:
        ts = _require(ctx, "timestamp")
        if ts.date() <= self.expiry_date:
            return SATISFIED
        return ConditionResult(Verdict.VIOLATED, f"{ts.date().isoformat()} after {self.expiry_date.isoformat()}")


@dataclass(frozen=True)
class DayOfWeek:
    allowed_days: frozenset[str]

    kind = "DayOfWeek"
    terminal = False

    def __post_init__(self) -> None:
        days = frozenset(d.upper() for d in self.allowed_days)
        if not days:
            raise InvalidCondition("DayOfWeek needs at least one day")
        unknown = days - set(WEEKDAYS)
        if unknown:
            raise InvalidCondition(f"unknown weekday codes: {sorted(unknown)}")
        object.__setattr__(self, "allowed_days", days)

    @property
    def label(self) -> str:
        ordered = [d for d in WEEKDAYS if d in self.allowed_days]
        return f"DayOfWeek({','.join(ordered)})"

    def evaluate(self, ctx: RequestContext) -> ConditionResult:
        ts = _require(ctx, "timestamp")
        day = WEEKDAYS[ts.weekday()]
        if day in self.allowed_days:
            return SATISFIED
        return ConditionResult(Verdict.VIOLATED, f"{day} not in {self.label}")


@dataclass(frozen=True)
class GeoFence:
    allowed_zones: frozenset[str]

    kind = "GeoFence"
    terminal = False

    def __post_init__(self) -> None:
        zones = frozenset(self.allowed_zones)
        if not zones:
            raise InvalidCondition("GeoFence needs at least one zone")
        object.__setattr__(self, "allowed_zones", zones)

    @property
    def label(self) -> str:
        return f"GeoFence({','.join(sorted(self.allowed_zones))})"

    def evaluate(self, ctx: RequestContext) -> ConditionResult:
        zone = _require(ctx, "zone")
        if zone in self.allowed_zones:
            return SATISFIED
        return ConditionResult(Verdict.VIOLATED, f"zone {zone!r} not in {self.label}")


@dataclass(frozen=True)
class IpAllowlist:
    """Allowed source networks in CIDR notation; a bare address is a /32 (or /128)."""

    allowed_prefixes: frozenset[str]

    kind = "IpAllowlist"
    terminal = False

    def __post_init__(self) -> None:
        prefixes = frozenset(self.allowed_prefixes)
        if not prefixes:
            raise InvalidCondition("IpAllowlist needs at least one prefix")
        for p in prefixes:
            try:
                ipaddress.ip_network(p, strict=False)
            except ValueError as exc:
                raise InvalidCondition(f"bad address prefix {p!r}") from exc
        object.__setattr__(self, "allowed_prefixes", prefixes)

    @property
    def label(self) -> str:
        return f"IpAllowlist({','.join(sorted(self.allowed_prefixes))})"

    def evaluate(self, ctx: RequestContext) -> ConditionResult:
        raw = _require(ctx, "source_address")
        try:
            addr = ipaddress.ip_address(raw)
        except ValueError:
            return ConditionResult(Verdict.VIOLATED, f"unparseable source address {raw!r}")
        for p in self.allowed_prefixes:
            net = ipaddress.ip_network(p, strict=False)
            if addr.version == net.version and addr in net:
                return SATISFIED
        return ConditionResult(Verdict.VIOLATED, f"{raw} not in {self.label}")


@dataclass(frozen=True)
class AccessFrequency:
    max_uses: int

    kind = "AccessFrequency"
    terminal = True

    def __post_init__(self) -> None:
        if isinstance(self.max_uses, bool) or not isinstance(self.max_uses, int) or self.max_uses < 1:
            raise InvalidCondition("AccessFrequency needs max_uses >= 1")

    @property
    def label(self) -> str:
        return f"AccessFrequency({self.max_uses})"

    def evaluate(self, ctx: RequestContext) -> ConditionResult:
        used = _require(ctx, "prior_use_count")
        if used < self.max_uses:
            return SATISFIED
        return ConditionResult(Verdict.EXHAUSTED, f"{used} of {self.max_uses} uses consumed")


Condition = Union[TimeWindow, CalendarExpiry, DayOfWeek, GeoFence, IpAllowlist, AccessFrequency]

CONDITION_TYPES: dict[str, type] = {
    c.kind: c for c in (TimeWindow, CalendarExpiry, DayOfWeek, GeoFence, IpAllowlist, AccessFrequency)
}


def evaluate_condition(cond: Condition, ctx: RequestContext) -> ConditionResult:
    return cond.evaluate(ctx)


def _hhmm(minute: int) -> str:
    return f"{minute // 60:02d}:{minute % 60:02d}"
