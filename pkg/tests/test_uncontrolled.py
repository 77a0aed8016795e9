import logging

import numpy as np
import pytest

from oracles import naive_three_step
from rovmeasure import datasets as ds
from rovmeasure.datasets import FixtureBuilder
from rovmeasure.rib import AsRelationships, RibSnapshot, VantagePoint, parse_relationships
from rovmeasure.rpki import RoaSet, Vrp
from rovmeasure.uncontrolled import (
    Evidence,
    classify,
    flag_non_enforcing,
    infer,
    mark_candidates,
)

NO_RELS = AsRelationships()


def test_worked_example_flags_and_candidates():
    snap, roas = ds.worked_example()
    flagged = flag_non_enforcing(snap, roas, NO_RELS)
    assert flagged == {ds.A, ds.D}
    assert mark_candidates(snap, roas, flagged) == {ds.C: {ds.O}, ds.E: {ds.O}}
    res = infer(snap, roas, NO_RELS)
    assert res.enforcing == set()


def test_no_invalid_routes_no_flags():
    b = FixtureBuilder()
    vp = VantagePoint("c", 1, "1")
    b.route(vp, [2, 3])
    snap, roas = b.build()
    assert flag_non_enforcing(snap, roas, NO_RELS) == set()


def test_direct_customer_exception():
    # VP 1 has customer 2 which originates an invalid route through 3
    b = FixtureBuilder()
    vp = VantagePoint("c", 1, "1")
    b.invalid(vp, [3, 2])
    snap, roas = b.build()
    rels = parse_relationships(["1|2|-1", "3|2|-1"])
    assert flag_non_enforcing(snap, roas, rels) == set()
    assert flag_non_enforcing(snap, roas, NO_RELS) == {3}


def test_transitive_customer_exception_is_opt_in():
    b = FixtureBuilder()
    vp = VantagePoint("c", 1, "1")
    b.invalid(vp, [2, 3])
    snap, roas = b.build()
    rels = parse_relationships(["1|2|-1", "2|3|-1"])
    assert flag_non_enforcing(snap, roas, rels) == {2}
    assert flag_non_enforcing(snap, roas, rels, transitive_customers=True) == set()


def test_own_as_exception_without_relationships(caplog):
    b = FixtureBuilder()
    vp = VantagePoint("c", 1, "1")
    b.invalid(vp, [2, 1])
    snap, roas = b.build()
    with caplog.at_level(logging.WARNING):
        assert flag_non_enforcing(snap, roas, None) == set()
    assert "relationship" in caplog.text


def test_identical_paths_mark_nothing():
    b = FixtureBuilder()
    vp = VantagePoint("c", 1, "1")
    b.route(vp, [2, 3, 9])
    b.invalid(vp, [2, 3, 9])
    snap, roas = b.build()
    assert mark_candidates(snap, roas, set()) == {}


def test_difference_of_two_marks_nothing():
    # all path pairs of this 5-AS fixture, enumerated by hand:
    #   [2,3,4,9] vs [2,9] -> {3,4}: two ASes, no mark
    #   [2,5,9]   vs [2,9] -> {5}: mark 5
    b = FixtureBuilder()
    vp = VantagePoint("c", 1, "1")
    b.route(vp, [2, 3, 4, 9])
    b.route(vp, [2, 5, 9])
    b.invalid(vp, [2, 9])
    snap, roas = b.build()
    assert mark_candidates(snap, roas, set()) == {5: {9}}


def test_prepending_does_not_change_marks():
    b = FixtureBuilder()
    vp = VantagePoint("c", 1, "1")
    b.route(vp, [2, 2, 5, 5, 9, 9])
    b.invalid(vp, [2, 9, 9])
    snap, roas = b.build()
    assert mark_candidates(snap, roas, set()) == {5: {9}}


def test_threshold():
    cands = {10: {1, 2, 3}, 11: {1, 2}}
    assert classify(cands, 3) == {10}
    assert classify(cands, 2) == {10, 11}
    assert classify({}, 3) == set()
    with pytest.raises(ValueError):
        classify(cands, 0)


def test_collector_split_subset_sensitivity():
    snap, roas = ds.collector_split()
    full = infer(snap, roas, NO_RELS)
    wide = infer(ds.with_collectors(snap, [ds.WIDE]), roas, NO_RELS)
    assert wide.enforcing == set(ds.SPLIT_ENFORCING_AT_WIDE)
    assert set(ds.SPLIT_FLAGGED_AT_RV4) <= full.non_enforcing
    # an AS enforcing on the subset, non-enforcing on everything
    assert wide.enforcing & full.non_enforcing == set(ds.SPLIT_FLAGGED_AT_RV4)
    # and the converse: enforcing on everything, only one origin on the subset
    assert ds.SPLIT_8100 in full.enforcing
    assert wide.candidates[ds.SPLIT_8100] == set(ds.SPLIT_8100_ORIGINS_WIDE)


def _random_snapshot(rng, n_vps=6, n_routes=40):
    b = FixtureBuilder()
    vps = [VantagePoint("r", 100 + i, str(i)) for i in range(n_vps)]
    raw = []
    for _ in range(n_routes):
        vp = vps[int(rng.integers(0, n_vps))]
        origin = int(rng.integers(1, 6))
        mid = [int(a) for a in rng.choice(np.arange(10, 20), size=int(rng.integers(0, 4)), replace=False)]
        path = mid + [origin]
        if rng.random() < 0.15:
            path = [vp.peer_asn] + path
        if rng.random() < 0.4:
            b.invalid(vp, path)
            raw.append((vp.peer_asn, str(vp), path, "invalid"))
        else:
            b.route(vp, path)
            raw.append((vp.peer_asn, str(vp), path, "not-found"))
    snap, roas = b.build()
    return snap, roas, raw


def test_matches_naive_pipeline_on_random_snapshots():
    rng = np.random.default_rng(31)
    for _ in range(200):
        snap, roas, raw = _random_snapshot(rng)
        res = infer(snap, roas, NO_RELS)
        flagged, cand, enforcing = naive_three_step(raw)
        assert res.non_enforcing == flagged
        assert res.candidates == cand
        assert res.enforcing == enforcing
        assert not res.enforcing & res.non_enforcing


def test_removing_a_vp_never_adds_flags():
    rng = np.random.default_rng(5)
    for _ in range(50):
        snap, roas, _ = _random_snapshot(rng)
        ev = Evidence(snap, roas, NO_RELS)
        full = ev.result().non_enforcing
        for vp in snap.vantage_points:
            rest = [v for v in snap.vantage_points if v != vp]
            assert ev.result(rest).non_enforcing <= full


def test_order_and_thread_independence():
    rng = np.random.default_rng(8)
    snap, roas, _ = _random_snapshot(rng, n_vps=10, n_routes=120)
    entries = list(snap)
    rng.shuffle(entries)
    a = infer(snap, roas, NO_RELS).to_json()
    b = infer(RibSnapshot(entries), roas, NO_RELS, threads=4).to_json()
    assert a == b


def test_evidence_reuse_equals_restricted_snapshot():
    snap, roas, witness = ds.sixty_vp()
    ev = Evidence(snap, roas, NO_RELS)
    rng = np.random.default_rng(3)
    vps = snap.vantage_points
    for _ in range(20):
        chosen = [vps[i] for i in sorted(rng.choice(len(vps), 44, replace=False))]
        assert ev.result(chosen).to_json() == infer(snap.restrict(chosen), roas, NO_RELS).to_json()


def test_empty_roas_mean_nothing_is_invalid():
    snap, _ = ds.worked_example()
    res = infer(snap, RoaSet(), NO_RELS)
    assert res.non_enforcing == set() and res.candidates == {}


def test_result_json_is_sorted():
    snap, roas = ds.worked_example()
    j = infer(snap, roas, NO_RELS).to_json()
    assert j["candidates"] == {str(ds.C): [ds.O], str(ds.E): [ds.O]}
    assert j["non_enforcing"] == sorted(j["non_enforcing"])
