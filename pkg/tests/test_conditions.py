from datetime import date, datetime, timedelta

import pytest
from hypothesis import given, strategies as st

from consentchain.domain.conditions import (
    AccessFrequency,
    CalendarExpiry,
    DayOfWeek,
    GeoFence,
    IpAllowlist,
    RequestContext,
    TimeWindow,
    Verdict,
)
from consentchain.domain.serialize import condition_from_dict, condition_to_dict
from consentchain.errors import InvalidCondition, MissingContextField


def at(ts, **kw):
    return RequestContext(ts, **kw)


def test_time_window_is_half_open():
    w = TimeWindow(8 * 60, 17 * 60)
    assert w.evaluate(at(datetime(2024, 6, 3, 8, 0))).satisfied
    assert w.evaluate(at(datetime(2024, 6, 3, 16, 59))).satisfied
    assert w.evaluate(at(datetime(2024, 6, 3, 17, 0))).verdict is Verdict.VIOLATED
    assert w.evaluate(at(datetime(2024, 6, 3, 7, 59))).verdict is Verdict.VIOLATED


def test_calendar_expiry_includes_the_last_day():
    c = CalendarExpiry(date(2024, 6, 30))
    assert c.evaluate(at(datetime(2024, 6, 30, 23, 59))).satisfied
    assert c.evaluate(at(datetime(2024, 7, 1, 0, 0))).verdict is Verdict.VIOLATED


def test_day_of_week():
    c = DayOfWeek(frozenset({"mon", "FRI"}))
    assert c.label == "DayOfWeek(MON,FRI)"
    assert c.evaluate(at(datetime(2024, 6, 7))).satisfied  # a Friday
    assert not c.evaluate(at(datetime(2024, 6, 8))).satisfied


def test_geofence_and_missing_zone():
    c = GeoFence(frozenset({"ward-a"}))
    assert c.evaluate(at(datetime(2024, 6, 3), zone="ward-a")).satisfied
    assert not c.evaluate(at(datetime(2024, 6, 3), zone="ward-b")).satisfied
    with pytest.raises(MissingContextField):
        c.evaluate(at(datetime(2024, 6, 3)))


def test_ip_allowlist_prefixes():
    c = IpAllowlist(frozenset({"10.0.0.0/8", "2001:db8::/32"}))
    assert c.evaluate(at(None, source_address="10.2.3.4")).satisfied
    assert c.evaluate(at(None, source_address="2001:db8::1")).satisfied
    assert not c.evaluate(at(None, source_address="11.0.0.1")).satisfied
    assert not c.evaluate(at(None, source_address="not-an-ip")).satisfied


def test_frequency_exhausts():
    c = AccessFrequency(5)
    assert c.evaluate(RequestContext(prior_use_count=4)).satisfied
    assert c.evaluate(RequestContext(prior_use_count=5)).verdict is Verdict.EXHAUSTED


@pytest.mark.parametrize("build", [
    lambda: TimeWindow(600, 600),
    lambda: TimeWindow(-1, 10),
    lambda: TimeWindow(0, 1441),
    lambda: CalendarExpiry(datetime(2024, 1, 1)),
    lambda: DayOfWeek(frozenset({"XYZ"})),
    lambda: DayOfWeek(frozenset()),
    lambda: GeoFence(frozenset()),
    lambda: IpAllowlist(frozenset({"300.1.1.1"})),
    lambda: AccessFrequency(0),
    lambda: AccessFrequency(True),
])
def test_invalid_parameters_rejected(build):
    with pytest.raises(InvalidCondition):
        build()


conditions = st.one_of(
    st.tuples(st.integers(0, 1439), st.integers(1, 1440)).filter(lambda t: t[0] < t[1]).map(lambda t: TimeWindow(*t)),
    st.dates(date(2000, 1, 1), date(2100, 1, 1)).map(CalendarExpiry),
    st.sets(st.sampled_from(["MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN"]), min_size=1).map(DayOfWeek),
    st.sets(st.text("abcz-", min_size=1, max_size=6), min_size=1, max_size=3).map(GeoFence),
    st.sets(st.sampled_from(["10.0.0.0/8", "192.168.1.7", "::1"]), min_size=1).map(IpAllowlist),
    st.integers(1, 1000).map(AccessFrequency),
)


@given(conditions)
def test_condition_dict_round_trip(c):
    assert condition_from_dict(condition_to_dict(c)) == c


@given(st.integers(0, 1439), st.integers(1, 1440), st.datetimes(datetime(2020, 1, 1), datetime(2030, 1, 1)))
def test_time_window_matches_minute_arithmetic(start, end, ts):
    if start >= end:
        return
    minute = ts.hour * 60 + ts.minute
    assert TimeWindow(start, end).evaluate(at(ts)).satisfied == (start <= minute < end)


@given(st.dates(date(2020, 1, 1), date(2030, 1, 1)), st.integers(-3, 3))
def test_expiry_depends_on_date_only(expiry, offset):
    ts = datetime.combine(expiry + timedelta(days=offset), datetime.min.time()) + timedelta(hours=23)
    assert CalendarExpiry(expiry).evaluate(at(ts)).satisfied == (offset <= 0)
