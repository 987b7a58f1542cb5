import math

import pytest
from hypothesis import given, strategies as st

from regensync.instance import load_fixture, load_instance
from regensync.network import load_network
from regensync.spstp import build_sync_pairs
from regensync.timetable import (
    MissingEventError, Timetable, overlap_closed_form, pair_overlap, total_overlap, validate_timetable,
)


def _tt(a_b1, d_a1=0.0, a_a1=-30.0, d_b1=None):
    d_b1 = a_b1 + 30 if d_b1 is None else d_b1
    return Timetable({("T1", "A1"): a_a1, ("T1", "B1"): a_b1}, {("T1", "A1"): d_a1, ("T1", "B1"): d_b1})


def test_trip_within_window(tiny_doc):
    net, p = load_network(tiny_doc)
    found = validate_timetable(_tt(150.0), net, p)
    assert [v for v in found if v.family == "trip"] == []


def test_trip_violation_slack(tiny_doc):
    net, p = load_network(tiny_doc)
    trip = [v for v in validate_timetable(_tt(100.0), net, p) if v.family == "trip"]
    assert len(trip) == 1
    assert trip[0].slack == pytest.approx(-20.0)


def test_headway_violation_slack():
    from conftest import two_station_doc
    doc = two_station_doc()
    doc["trains"].append(dict(doc["trains"][0], id="T2"))
    doc["headways"] = [{"from": "A1", "to": "B1", "train": "T1", "next_train": "T2", "headway": [90, 90]}]
    inst = load_instance(doc | {"initial_timetable": doc["initial_timetable"] + [
        {"train_id": "T2", "platform_id": "A1", "arrival_s": 460, "departure_s": 490},
        {"train_id": "T2", "platform_id": "B1", "arrival_s": 640, "departure_s": 670},
    ]})
    found = [v for v in validate_timetable(inst.initial, inst.network, inst.params) if v.family == "headway"]
    # departures 430 -> 490 at A1, 610 -> 670 at B1: both 30 s short
    assert sorted(v.slack for v in found) == [pytest.approx(-30.0)] * 2


def test_missing_event_named(tiny_doc):
    net, p = load_network(tiny_doc)
    tt = Timetable({("T1", "A1"): 0.0}, {("T1", "A1"): 30.0})
    with pytest.raises(MissingEventError, match="B1"):
        validate_timetable(tt, net, p)


def test_feasible_initial(tiny_doc):
    inst = load_instance(tiny_doc)
    assert validate_timetable(inst.initial, inst.network, inst.params) == []


def test_dwell_and_travel_families(tiny_doc):
    net, p = load_network(tiny_doc)
    tt = Timetable({("T1", "A1"): 0.0, ("T1", "B1"): 500.0}, {("T1", "A1"): 5.0, ("T1", "B1"): 600.0})
    families = {v.family for v in validate_timetable(tt, net, p)}
    assert families == {"dwell", "trip", "total-travel"}
    assert all(v.slack < 0 for v in validate_timetable(tt, net, p))


def test_tolerance_respected(tiny_doc):
    net, p = load_network(tiny_doc)
    assert validate_timetable(_tt(120.0 - 5e-7), net, p) == []
    assert validate_timetable(_tt(120.0 - 5e-6), net, p) != []


@pytest.mark.parametrize("d, a, alpha, beta, want", [
    (100, 110, 15, 20, 10),
    (100, 95, 15, 20, 0),
    (100, 95, 300, 300, 0),
    (100, 110, 30, 5, 5),
])
def test_overlap_examples(d, a, alpha, beta, want):
    assert overlap_closed_form(d, a, alpha, beta) == want


def _intersection(d, a, alpha, beta):
    return max(0.0, min(d + alpha, a) - max(d, a - beta))


times = st.floats(-1e4, 1e4, allow_nan=False)
durations = st.floats(0, 500, allow_nan=False)


@given(times, times, durations, durations)
def test_overlap_matches_intersection(d, a, alpha, beta):
    assert math.isclose(overlap_closed_form(d, a, alpha, beta), _intersection(d, a, alpha, beta), abs_tol=1e-9)


@given(times, times, durations, durations, st.floats(-1e4, 1e4, allow_nan=False))
def test_overlap_translation_invariant(d, a, alpha, beta, c):
    assert math.isclose(
        overlap_closed_form(d + c, a + c, alpha, beta), overlap_closed_form(d, a, alpha, beta), abs_tol=1e-8
    )


@given(times, times, durations, durations)
def test_overlap_bounds(d, a, alpha, beta):
    v = overlap_closed_form(d, a, alpha, beta)
    assert 0 <= v <= min(alpha, beta) + 1e-12
    if a >= d + alpha + beta or a <= d:
        assert v == 0


def test_total_overlap_additive():
    from regensync.spstp import SyncPair
    tt = Timetable({("U", "j"): 110.0, ("V", "j"): 110.0}, {("T", "i"): 100.0, ("S", "i"): 100.0})
    p1 = SyncPair("i", "j", "T", "U", "right", 15, 20)
    p2 = SyncPair("i", "j", "S", "V", "right", 30, 5)
    assert total_overlap(tt, []) == 0
    assert total_overlap(tt, [p1, p2]) == 15


def test_four_train_fixture_by_hand():
    inst = load_fixture("four_train")
    right, left = build_sync_pairs(inst.network, inst.initial, inst.params)
    tt = inst.initial
    by_hand = 0.0
    for q in right:
        by_hand += _intersection(tt.d(q.t, q.i), tt.a(q.t_tilde, q.j), q.alpha_lb, q.beta_lb)
    for q in left:
        by_hand += _intersection(tt.d(q.t_tilde, q.j), tt.a(q.t, q.i), q.alpha_lb, q.beta_lb)
    assert total_overlap(tt, right + left) == pytest.approx(by_hand)
    assert by_hand > 0


def test_csv_round_trip(pes2):
    tt = pes2.initial
    assert Timetable.from_csv(tt.to_csv()) == tt
    assert tt.to_csv().splitlines()[0] == "train_id,platform_id,arrival_s,departure_s"


def test_pair_overlap_orientation():
    from regensync.spstp import SyncPair
    tt = Timetable({("T", "i"): 110.0}, {("U", "j"): 100.0})
    left = SyncPair("i", "j", "T", "U", "left", 15, 20)
    # U accelerates out of j at 100, T brakes into i until 110
    assert pair_overlap(tt, left) == 10
