from __future__ import annotations

import sys
from datetime import datetime
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from consentchain.authorization import AccessRequest, Authorizer  # noqa: E402
from consentchain.clock import LogicalClock  # noqa: E402
from consentchain.contract import ConsentService  # noqa: E402
from consentchain.domain.conditions import RequestContext  # noqa: E402
from consentchain.domain.types import OperationKind, UserRef  # noqa: E402
from consentchain.ledger.chain import Ledger  # noqa: E402

MONDAY_9AM = datetime(2024, 6, 3, 9, 0)


def make_service(start: datetime = MONDAY_9AM, **kw) -> ConsentService:
    clock = LogicalClock(start)
    return ConsentService(Ledger(genesis_time=clock.now_ms()), clock=clock, **kw)


def request(user: UserRef | str, patient: str, phi: str, op="Read", at: datetime = MONDAY_9AM,
            rid: str = "r", **ctx) -> AccessRequest:
    if isinstance(user, str):
        user = UserRef.parse(user)
    return AccessRequest(rid, user, patient, phi, OperationKind(op), RequestContext(at, **ctx))


@pytest.fixture
def service():
    return make_service()


@pytest.fixture
def authorizer(service):
    return Authorizer(service)


# one summary line per acceptance criterion --------------------------------
_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by this test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    n, title = marker
    _criteria.setdefault(n, (title, []))[1].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, outcomes = _criteria[n]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {verdict}  {title}")
