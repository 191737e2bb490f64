"""Desk-scale benchmark: gas and latency per consent batch, shaped like the published tables.

Gas is deterministic. Write latency is the simulated time from a batch's
first submission to the seal of its last block, read off the logical clock
(or the wall clock with ``wall=True``). Read latency is measured with
``perf_counter`` over a repository plus event-log read, which costs no gas.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import astuple, dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

from ..clock import LogicalClock, WallClock
from ..contract.consent_contract import CONSENT_CONTRACT
from ..contract.service import ConsentService, SealMode
from ..domain.conditions import AccessFrequency, CalendarExpiry, TimeWindow
from ..domain.serialize import condition_to_dict, consent_to_dict
from ..domain.types import InformedConsent, OperationKind, RoleCode, UserRef
from ..ledger.chain import Ledger, Transaction
from ..ledger.config import ChainConfig, profile_config

OPERATIONS = ("create", "alter", "terminate", "expire")
DEFAULT_COUNTS = tuple(range(4, 49, 4))
HEADER = ("consent_count", "operation", "chain_profile", "total_gas", "write_latency", "read_latency")
PATIENT = "bench-patient"
# every role the matrix lets read Visit Notes
_READERS = (RoleCode.DOC, RoleCode.NRS, RoleCode.PATIENT, RoleCode.EMC)
_EXPIRY = date(2024, 6, 30)


@dataclass(frozen=True)
class BenchRow:
    consent_count: int
    operation: str
    chain_profile: str
    total_gas: int
    write_latency: float  # ms
    read_latency: float   # ms


def bench_consents(n: int, *, expiring: bool = False, prefix: str = "b") -> list[InformedConsent]:
    out = []
    for i in range(n):
        role = _READERS[i % len(_READERS)]
        conds = [TimeWindow(8 * 60, 17 * 60), AccessFrequency(5)]
        if expiring:
            conds.append(CalendarExpiry(_EXPIRY))
        out.append(InformedConsent(f"{prefix}-{i:03d}", PATIENT, {UserRef(role, f"{role.value.lower()}-{i}")},
                                   {"PHI1005"}, {OperationKind.READ}, frozenset(conds)))
    return out


def _service(config: ChainConfig, wall: bool) -> ConsentService:
    clock = WallClock() if wall else LogicalClock(datetime(2024, 6, 3, 8, 0))
    ledger = Ledger(config, test_mode=False, genesis_time=clock.now_ms())
    svc = ConsentService(ledger, clock=clock, required_roles=(), auto_sweep=False,
                         seal_mode=SealMode.WALL if wall else SealMode.SCHEDULED)
    svc.deploy_container(PATIENT)
    return svc


def _batch(svc: ConsentService, calls: Iterable[tuple[str, dict]]) -> tuple[int, float]:
    """Submit every call, seal until the pool drains; return (gas, makespan ms)."""
    txs: list[Transaction] = []
    for call, args in calls:
        tx = svc.build_tx(CONSENT_CONTRACT, call, args)
        svc.submit(tx)
        txs.append(tx)
    start = min(tx.submitted_at for tx in txs)
    blocks = svc.flush()
    gas = sum(tx.gas_used for b in blocks for tx in b.transactions)
    return gas, float(blocks[-1].timestamp - start)


def _read_latency(svc: ConsentService, repeats: int = 5) -> float:
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        svc.container(PATIENT).active()
        svc.ledger.events(patient_id=PATIENT)
        samples.append((time.perf_counter() - t0) * 1000)
    return statistics.median(samples)


def _create_calls(consents):
    return [("create_consent", {"patient_id": PATIENT, "consent": consent_to_dict(ic)}) for ic in consents]


def run_operation(operation: str, count: int, config: ChainConfig, *, wall: bool = False) -> tuple[int, float, float]:
    if operation not in OPERATIONS:
        raise ValueError(f"unknown bench operation {operation!r}")
    svc = _service(config, wall)
    consents = bench_consents(count, expiring=operation == "expire")
    if operation == "create":
        gas, write = _batch(svc, _create_calls(consents))
        return gas, write, _read_latency(svc)

    _batch(svc, _create_calls(consents))
    if operation == "alter":
        calls = []
        for ic in consents:
            new = InformedConsent(ic.consent_id + "-v2", PATIENT, ic.users, ic.objects, ic.operations,
                                  frozenset({TimeWindow(8 * 60, 17 * 60), AccessFrequency(10)}))
            calls.append(("alter_consent", {"patient_id": PATIENT, "old_id": ic.consent_id,
                                            "consent": consent_to_dict(new)}))
    elif operation == "terminate":
        calls = [("terminate_consent", {"patient_id": PATIENT, "consent_id": ic.consent_id}) for ic in consents]
    else:
        if not wall:
            svc.advance_clock(datetime.combine(_EXPIRY + timedelta(days=1), datetime.min.time()))
        violated = condition_to_dict(CalendarExpiry(_EXPIRY))
        calls = [("expire_consents", {"patient_id": PATIENT, "expirations": [
            {"consent_id": ic.consent_id, "violated": violated} for ic in consents]})]
    gas, write = _batch(svc, calls)
    return gas, write, _read_latency(svc)


def run_bench(profiles: Sequence[str] = ("desk",), counts: Sequence[int] = DEFAULT_COUNTS,
              operations: Sequence[str] = OPERATIONS, *, config: ChainConfig | None = None,
              wall: bool = False) -> list[BenchRow]:
    """One row per profile x operation x count, in that nesting order."""
    if any(c <= 0 for c in counts):
        raise ValueError("consent counts must be positive")
    rows = []
    for profile in profiles:
        cfg = config if config is not None else profile_config(profile)
        for op in operations:
            for n in counts:
                gas, write, read = run_operation(op, n, cfg, wall=wall)
                rows.append(BenchRow(n, op, profile, gas, round(write, 3), round(read, 4)))
    return rows


def to_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow(astuple(r))
    return buf.getvalue()


def plot_report(rows: Sequence[BenchRow], out_dir: str | Path) -> list[Path]:
    """Gas and latency against consent count, one line per operation, one file pair per profile."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for profile in sorted({r.chain_profile for r in rows}):
        subset = [r for r in rows if r.chain_profile == profile]
        for metric, ylabel in (("total_gas", "total gas"), ("write_latency", "write latency (ms)"),
                               ("read_latency", "read latency (ms)")):
            fig, ax = plt.subplots(figsize=(6, 3.5))
            for op in OPERATIONS:
                pts = [(r.consent_count, getattr(r, metric)) for r in subset if r.operation == op]
                if pts:
                    xs, ys = zip(*pts)
                    ax.plot(xs, ys, marker="o", label=op)
            ax.set_xlabel("consents")
            ax.set_ylabel(ylabel)
            ax.set_title(f"{profile}: {ylabel}")
            ax.legend(frameon=False)
            fig.tight_layout()
            path = out_dir / f"{profile}_{metric}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    return written
