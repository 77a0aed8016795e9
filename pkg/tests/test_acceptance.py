"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (visible in
``pytest -v`` output) before asserting, so a run doubles as a report.
"""
import json
import time

import numpy as np
import pytest

from oracles import naive_validate, random_validation_case
from rovmeasure import datasets
from rovmeasure.analysis import divergence, sample_vps
from rovmeasure.cli import dispatch
from rovmeasure.experiment import (
    O1,
    O3,
    SimDriver,
    run_filter_experiment,
    run_prefer_valid_experiment,
)
from rovmeasure.rib import VantagePoint
from rovmeasure.rpki import IpPrefix, RoaSet, ValidationState, Vrp, validate
from rovmeasure.sim import plant_scenario, run, snapshot
from rovmeasure.sim.generate import plant_filters, random_topology
from rovmeasure.sim.scenarios import ALT_ORIGIN, P_E, P_R, PEERING
from rovmeasure.experiment import ExperimentPlan
from rovmeasure.uncontrolled import Evidence, flag_non_enforcing, infer


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def _steady(name):
    sc = plant_scenario(name)
    tl = run(sc.topology, sc.events, sc.horizon, sc.roas)
    return sc, snapshot(tl, sc.horizon)


def test_01_rfc6811_oracle_equivalence(report):
    rng = np.random.default_rng(20161)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(10_000):
        origin, prefix, vrps = random_validation_case(rng)
        roas = RoaSet(Vrp.make(p, a, m) for p, m, a in vrps)
        if validate(origin, IpPrefix.parse(prefix), roas).value != naive_validate(origin, prefix, vrps):
            mismatches += 1
    dt = time.perf_counter() - t0
    report(1, mismatches == 0 and dt < 10, f"10000 cases, {mismatches} mismatches, {dt:.2f}s")


def test_02_worked_example(report, tmp_path, worked_files):
    rib, vrps = worked_files
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        code = dispatch(["infer", "--rib", str(rib), "--vrps", str(vrps), "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    rep = json.loads(outs[0])
    C, E, O = datasets.C, datasets.E, datasets.O
    ok = (rep["candidates"] == {str(C): [O], str(E): [O]}
          and rep["non_enforcing"] == sorted([datasets.A, datasets.D])
          and outs[0] == outs[1])
    report(2, ok, f"candidates {rep['candidates']}, flagged {rep['non_enforcing']}, byte-stable {outs[0] == outs[1]}")


def _threshold_fixture(n_origins):
    b = datasets.FixtureBuilder()
    vp = VantagePoint("t", 64600, "1")
    for o in range(65101, 65101 + n_origins):
        b.route(vp, [64500, 64510, o])
        b.invalid(vp, [64500, o])
    return b.build()


def test_03_threshold(report):
    three = infer(*_threshold_fixture(3))
    two = infer(*_threshold_fixture(2))
    ok = three.enforcing == {64510} and two.enforcing == set() and two.candidates == {64510: {65101, 65102}}
    report(3, ok, f"3 origins -> {sorted(three.enforcing)}, 2 origins -> {sorted(two.enforcing)}")


def test_04_subset_misclassification(report):
    snap, roas, _ = datasets.sixty_vp()
    t0 = time.perf_counter()
    rep = sample_vps(snap, roas, sample_size=44, samples=5000, seed=0)
    again = sample_vps(snap, roas, sample_size=44, samples=5000, seed=0)
    dt = time.perf_counter() - t0
    ev = Evidence(snap, roas)
    full_fp = ev.result(snap.vantage_points).enforcing & rep.full.non_enforcing
    n_fp = rep.samples_with_false_positives()
    ok = n_fp >= 1 and not full_fp and rep.rows == again.rows and dt < 60
    report(4, ok, f"{n_fp}/5000 samples with false positives, full set {len(full_fp)}, "
                  f"deterministic {rep.rows == again.rows}, {dt:.1f}s for two runs")


def test_05_traffic_engineering(report):
    sc, snap = _steady("d")
    res = infer(snap, sc.roas)
    hist = divergence(snap, sc.roas).histogram
    ok = bool(res.enforcing) and sc.truth == {} and set(hist) == {1} and hist[1] > 0
    report(5, ok, f"enforcing {sorted(res.enforcing)} vs planted {sc.truth}, divergence buckets {dict(hist)}")


def test_06_controlled_soundness_completeness(report):
    plan = ExperimentPlan(P_R, P_E, origin=PEERING, alternate_origin=ALT_ORIGIN)
    t0 = time.perf_counter()
    fp = fn = tested = 0
    for seed in range(100):
        rng = np.random.default_rng([2024, seed])
        topo = random_topology(seed, int(rng.integers(20, 61)))
        adjacent = sorted(topo.neighbors[PEERING])
        k = int(rng.integers(1, len(adjacent) + 1))
        planted = {int(a) for a in rng.choice(adjacent, size=k, replace=False)}
        topo = plant_filters(topo, planted, as_vantage_points=True)
        res = run_filter_experiment(SimDriver(topo), plan)
        found = res.inference.filtering()
        observed = {o.vp.peer_asn for o in res.observations
                    if o.vp.peer_asn in planted and o.eligible and o.c1_path == (PEERING,)}
        fp += len(found - planted)
        fn += len(observed - found)
        tested += len(observed)
    dt = time.perf_counter() - t0
    ok = fp == 0 and fn == 0 and tested > 0 and dt < 300
    report(6, ok, f"100 topologies, {tested} observed filterers, {fp} FP, {fn} FN, {dt:.1f}s")


def test_07_route_server_case(report):
    sc, snap = _steady("b")
    on_invalid = [e for e, s in snap.validated(sc.roas.with_changes(add=sc.plan.filter_roas("C2")))
                  if s is ValidationState.INVALID and 50300 in e.path.asns]
    flagged = flag_non_enforcing(snap, sc.roas.with_changes(add=sc.plan.filter_roas("C2")))
    res = run_filter_experiment(SimDriver(sc.topology), sc.plan)
    v = res.inference.verdicts.get(50300)
    ok = (bool(on_invalid) and 50300 in flagged and v is not None and v.policy == "filter_invalid"
          and v.route_server_only is True and v.sessions == [PEERING])
    report(7, ok, f"{len(on_invalid)} invalid paths through AS50300, flagged {50300 in flagged}, "
                  f"verdict {v.to_json() if v else None}")


def test_08_nonadjacent_localization(report):
    one = run_filter_experiment(SimDriver(plant_scenario("c").topology), plant_scenario("c").plan)
    sc2 = plant_scenario("nonadjacent_filterer_two_vps")
    two = run_filter_experiment(SimDriver(sc2.topology), sc2.plan)
    sets1 = [cs.candidates for cs in one.inference.candidate_sets]
    sets2 = [cs.candidates for cs in two.inference.candidate_sets]
    ok = any(59715 in s for s in sets1) and sets2 == [frozenset({59715})] and two.inference.filtering() == {59715}
    report(8, ok, f"one VP: {[sorted(s) for s in sets1]}, two VPs: {[sorted(s) for s in sets2]}")


def test_09_prefer_valid_discrimination(report):
    sc = plant_scenario("e")
    pv = run_prefer_valid_experiment(SimDriver(sc.topology), sc.plan)
    scf = plant_scenario("prefer_valid_filter")
    fl = run_prefer_valid_experiment(SimDriver(scf.topology), scf.plan)
    strength = {vp.peer_asn: s for vp, s in pv.tracking.items()}
    v = pv.inference.verdicts.get(64950)
    ok = (v is not None and v.policy == "prefer_valid" and v.strength == "strong"
          and strength.get(64950) == "strong"
          and fl.inference.verdict(64950) == "filter_invalid" and not fl.inference.preferring())
    report(9, ok, f"prefer_valid scenario -> {pv.inference.verdict(64950)} ({strength.get(64950)}); "
                  f"filter substitute -> {fl.inference.verdict(64950)}, preferring {sorted(fl.inference.preferring())}")


def test_10_withdraw_reannounce(report):
    sc = plant_scenario("f")
    base = run_filter_experiment(SimDriver(sc.topology), sc.plan)
    var = run_filter_experiment(SimDriver(sc.topology), sc.plan, "withdraw_reannounce")
    ok = (set(base.classes(64960)) == {O1} and set(var.classes(64960)) == {O3}
          and 64960 not in base.inference.filtering() and 64960 in var.inference.filtering())
    report(10, ok, f"base {sorted(set(base.classes(64960)))}, variant {sorted(set(var.classes(64960)))}")


def _all_subcommands(base, rib, vrps, threads):
    t = ["--threads", str(threads)]
    runs = [
        ["validate", "--rib", rib, "--vrps", vrps, "--out", str(base / "validate.json")],
        ["infer", "--rib", rib, "--vrps", vrps, "--out", str(base / "infer.json")],
        ["sample", "--rib", rib, "--vrps", vrps, "--n", "44", "--k", "200", "--seed", "5",
         "--out", str(base / "sample.csv")],
        ["visibility", "--rib", rib, "--vrps", vrps, "--out", str(base / "visibility.csv")],
        ["coverage", "--rib", rib, "--vrps", vrps, "--out", str(base / "coverage.csv")],
        ["divergence", "--rib", rib, "--vrps", vrps, "--out", str(base / "divergence.csv")],
        ["simulate", "--scenario", "d", "--seed", "3", "--out-snapshots", str(base / "sim")],
        ["experiment", "--scenario", "b", "--out", str(base / "experiment.json")],
        ["experiment", "--scenario", "e", "--out", str(base / "prefer_valid.json")],
    ]
    codes = [dispatch(argv + t) for argv in runs]
    files = {p.relative_to(base).as_posix(): p.read_bytes() for p in sorted(base.rglob("*"))
             if p.is_file() and not p.name.endswith("manifest.json")}
    ids = {json.loads(p.read_text())["manifest_id"] for p in base.rglob("*manifest.json")}
    return codes, files, ids


def test_11_determinism(report, tmp_path):
    snap, roas, _ = datasets.sixty_vp()
    rib, vrps = tmp_path / "sixty.jsonl", tmp_path / "sixty.csv"
    rib.write_text("".join(e.to_json() + "\n" for e in snap))
    with open(vrps, "w", newline="") as fh:
        roas.to_csv(fh)
    results = [_all_subcommands(tmp_path / name, str(rib), str(vrps), th)
               for name, th in (("a", 1), ("b", 1), ("c", 8))]
    codes_ok = all(c == 0 for codes, _, _ in results for c in codes)
    same = results[0][1] == results[1][1] == results[2][1]
    ids_same = results[0][2] == results[1][2] == results[2][2]
    n = len(results[0][1])
    report(11, codes_ok and same and ids_same and n == 11,
           f"{n} report files x3 runs (threads 1, 1, 8): byte-identical {same}, manifest ids equal {ids_same}")
