"""Controlled ROV experiments and the inferences drawn from them.

The filtering experiment announces a reference prefix and an experiment
prefix identically, then flips the experiment prefix's ROA between
C1 (announcement valid) and C2 (announcement invalid).  A vantage point is
kept only if it sees the reference prefix and uses the same route for both
prefixes under C1.  Under C2 it shows O1 (same route), O2 (different route)
or O3 (no route).  Since nothing but the ROA differs between the prefixes,
O2/O3 means some AS on the C1 path reacted to validity.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from ..rib import RibSnapshot, VantagePoint
from ..rpki import IpPrefix
from .driver import Driver, DriverError
from .plan import (
    DIFFERING_IN_C1,
    INELIGIBLE,
    NO_REFERENCE,
    O1,
    O2,
    O3,
    CandidateSet,
    ExperimentPlan,
    Observation,
    PolicyInference,
    RoundRecord,
    Verdict,
)

log = logging.getLogger(__name__)

Path = tuple[int, ...]


def route_path(snap: RibSnapshot, vp: VantagePoint, prefix: IpPrefix) -> Path | None:
    e = snap.route(vp, prefix)
    return None if e is None else e.path.compressed().asns


def _vps(*snaps: RibSnapshot) -> list[VantagePoint]:
    out: set[VantagePoint] = set()
    for s in snaps:
        out.update(s.vantage_points)
    return sorted(out)


class ControlViolation(Exception):
    pass


def classify_round(
    c1: RibSnapshot, c2: RibSnapshot, plan: ExperimentPlan, round_no: int
) -> list[Observation]:
    """Classify every vantage point from the C1 and C2 snapshots of one round.

    Raises :class:`ControlViolation` when an eligible vantage point's route to
    the reference prefix moved between C1 and C2.
    """
    pr, pe = plan.reference_prefix, plan.experiment_prefix
    out = []
    for vp in _vps(c1, c2):
        ref1 = route_path(c1, vp, pr)
        exp1 = route_path(c1, vp, pe)
        if ref1 is None:
            out.append(Observation(vp, round_no, "C2", INELIGIBLE, NO_REFERENCE, c1_path=exp1))
            continue
        if exp1 != ref1:
            out.append(Observation(vp, round_no, "C2", INELIGIBLE, DIFFERING_IN_C1,
                                   reference_path=ref1, c1_path=exp1))
            continue
        ref2 = route_path(c2, vp, pr)
        if ref2 != ref1:
            raise ControlViolation(f"{vp}: reference route changed from {ref1} to {ref2}")
        exp2 = route_path(c2, vp, pe)
        if exp2 is None:
            cls = O3
        elif exp2 != ref2:
            cls = O2
        else:
            cls = O1
        out.append(Observation(vp, round_no, "C2", cls, None, ref2, exp1, exp2))
    return out


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    variant: str
    observations: list[Observation] = field(default_factory=list)
    rounds: list[RoundRecord] = field(default_factory=list)
    inference: PolicyInference | None = None

    @property
    def completed_rounds(self) -> int:
        return sum(r.status == "completed" for r in self.rounds)

    def classes(self, asn: int) -> list[str]:
        return [o.cls for o in self.observations if o.vp.peer_asn == asn]

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "plan": self.plan.to_json(),
            "rounds": [r.to_json() for r in self.rounds],
            "observations": [o.to_json() for o in self.observations],
            "inference": None if self.inference is None else self.inference.to_json(),
        }


def run_filter_experiment(driver: Driver, plan: ExperimentPlan, variant: str = "base") -> ExperimentResult:
    """Alternate C1/C2 for ``plan.rounds`` rounds and classify each vantage point.

    With ``variant="withdraw_reannounce"`` the experiment prefix is withdrawn
    before every ROA change and announced again once the new ROAs have had
    ``plan.reannounce_delay`` seconds to propagate.
    """
    if variant not in ("base", "withdraw_reannounce"):
        raise ValueError(f"unknown variant {variant!r}")
    plan.check_driver(driver.max_roa_delay)
    pr, pe, origin = plan.reference_prefix, plan.experiment_prefix, plan.origin

    driver.set_roas(plan.filter_roas("C1"))
    driver.wait(plan.hold)
    driver.announce(pr, origin)
    driver.announce(pe, origin)

    def apply(config: str) -> None:
        if variant == "withdraw_reannounce":
            driver.withdraw(pe, origin)
            driver.set_roas(plan.filter_roas(config))
            driver.wait(plan.reannounce_delay)
            driver.announce(pe, origin)
        else:
            driver.set_roas(plan.filter_roas(config))
        driver.wait(plan.hold)

    result = ExperimentResult(plan, variant)
    for r in range(1, plan.rounds + 1):
        snaps: dict[str, RibSnapshot] = {}
        try:
            for config in plan.schedule:
                apply(config)
                snaps[config] = driver.snapshot()
        except DriverError as exc:
            log.warning("round %d voided: driver failure: %s", r, exc)
            result.rounds.append(RoundRecord(r, "voided", f"driver failure: {exc}"))
            continue
        try:
            obs = classify_round(snaps["C1"], snaps["C2"], plan, r)
        except ControlViolation as exc:
            log.warning("round %d voided: %s", r, exc)
            result.rounds.append(RoundRecord(r, "voided", f"control violation: {exc}"))
            continue
        result.observations.extend(obs)
        result.rounds.append(RoundRecord(r, "completed"))
    result.inference = infer_filtering(result.observations, driver.via_route_server)
    return result


def run_withdraw_reannounce_variant(driver: Driver, plan: ExperimentPlan) -> ExperimentResult:
    return run_filter_experiment(driver, plan, variant="withdraw_reannounce")


def _chain(vp_asn: int, path: Path) -> Path:
    return path if path and path[0] == vp_asn else (vp_asn,) + path


def _sessions(vp_asn: int, path: Path) -> set[tuple[int, int]]:
    """(AS, neighbor it took the route from) along a path, VP end first."""
    c = _chain(vp_asn, path)
    return set(zip(c, c[1:]))


def intersect_candidates(sets: Iterable[Iterable[int]]) -> frozenset[int]:
    """ASes consistent with every observation; empty input yields an empty set."""
    out: frozenset[int] | None = None
    for s in sets:
        out = frozenset(s) if out is None else out & frozenset(s)
    return out or frozenset()


def infer_filtering(
    observations: Sequence[Observation],
    via_route_server: Callable[[int, int], bool] | None = None,
) -> PolicyInference:
    """Locate filtering ASes from classified observations.

    Each O2/O3 observation implicates the sessions along its C1 path (the
    vantage point's own AS included).  A session over which some O1/O2
    observation shows an AS still using the invalid route is cleared; an AS
    stays implicated by an observation while any of its sessions on that
    path is uncleared.  Every implicated vantage point gets the intersection
    of its observations' implicated ASes as a candidate set, which becomes a
    definite verdict when exactly one AS remains and every eligible round
    agrees.

    Why a singleton is safe: if no AS on the C1 path filtered, each of them,
    working outward from the origin, would still hold its C1 route under C2
    (every alternative is unchanged or worse), so the vantage point would
    see O1.  A filtering session never carries the invalid route, so it is
    never cleared.  A vantage point adjacent to the origin always yields a
    singleton: itself.
    """
    eligible = [o for o in observations if o.eligible]
    cleared: set[tuple[int, int]] = set()
    for o in eligible:
        if o.cls in (O1, O2) and o.c2_path:
            cleared |= _sessions(o.vp.peer_asn, o.c2_path)

    by_vp: dict[VantagePoint, list[Observation]] = defaultdict(list)
    for o in eligible:
        by_vp[o.vp].append(o)

    inference = PolicyInference()
    implicated: set[int] = set()
    for vp in sorted(by_vp):
        obs = by_vp[vp]
        support = [o for o in obs if o.supports_filtering]
        ratio = len(support) / len(obs)
        inference.consistency[vp] = ratio
        if not support:
            continue
        consistent = ratio == 1.0
        per_obs = [_sessions(vp.peer_asn, o.c1_path or ()) - cleared for o in support]
        candidates = intersect_candidates({a for a, _ in sessions} for sessions in per_obs)
        implicated |= candidates
        definite = consistent and len(candidates) == 1
        inference.candidate_sets.append(
            CandidateSet(vp, candidates, "filter_invalid", len(support), ratio, consistent, definite)
        )
        if not definite:
            continue
        asn = next(iter(candidates))
        nbrs = sorted({n for sessions in per_obs for a, n in sessions if a == asn})
        rs_only = None
        if via_route_server is not None:
            rs_only = all(via_route_server(asn, n) for n in nbrs)
        v = inference.verdicts.get(asn)
        if v is None:
            inference.verdicts[asn] = Verdict(asn, "filter_invalid", nbrs, rs_only,
                                              consistency=ratio, evidence=[str(vp)])
        else:
            v.sessions = sorted(set(v.sessions) | set(nbrs))
            v.evidence.append(str(vp))
            if rs_only is not None and v.route_server_only is not None:
                v.route_server_only = v.route_server_only and rs_only

    seen: set[int] = set()
    for o in eligible:
        seen.add(o.vp.peer_asn)
        for p in (o.c1_path, o.c2_path, o.reference_path):
            if p:
                seen.update(p[:-1])
    inference.no_rov_observed = seen - implicated
    return inference


# prefer-valid -----------------------------------------------------------------


@dataclass(frozen=True)
class PvObservation:
    vp: VantagePoint
    phase: str
    reference_path: Path | None
    experiment_path: Path | None

    @property
    def experiment_origin(self) -> int | None:
        return self.experiment_path[-1] if self.experiment_path else None

    @property
    def reference_origin(self) -> int | None:
        return self.reference_path[-1] if self.reference_path else None

    def to_json(self) -> dict:
        return {
            "vp": str(self.vp),
            "phase": self.phase,
            "reference_path": None if self.reference_path is None else list(self.reference_path),
            "experiment_path": None if self.experiment_path is None else list(self.experiment_path),
        }


@dataclass
class PreferValidResult:
    plan: ExperimentPlan
    observations: list[PvObservation]
    excluded: dict[VantagePoint, str]
    filter_observations: list[Observation]
    inference: PolicyInference
    tracking: dict[VantagePoint, str]

    def to_json(self) -> dict:
        return {
            "variant": "prefer_valid",
            "plan": self.plan.to_json(),
            "observations": [o.to_json() for o in self.observations],
            "excluded": {str(vp): r for vp, r in sorted(self.excluded.items())},
            "tracking": {str(vp): s for vp, s in sorted(self.tracking.items())},
            "filter_observations": [o.to_json() for o in self.filter_observations],
            "inference": self.inference.to_json(),
        }


def _divergence_candidates(vp_asn: int, a: Path, b: Path) -> tuple[int, frozenset[int]]:
    """AS where the two routes part ways, plus every AS below it on either branch."""
    common = 0
    while common < min(len(a), len(b)) - 1 and a[common] == b[common]:
        common += 1
    decider = a[common - 1] if common else vp_asn
    below = set(a[common:-1]) | set(b[common:-1])
    return decider, frozenset({decider} | below)


def run_prefer_valid_experiment(driver: Driver, plan: ExperimentPlan) -> PreferValidResult:
    """Detect ASes that rank valid routes above invalid ones without dropping them.

    Both prefixes are first announced exclusively from each origin with the
    experiment prefix invalid everywhere; vantage points must receive both
    prefixes from both origins to take part.  A vantage point lacking the
    experiment prefix in that phase is evidence of filtering instead.  Then
    both origins announce simultaneously while the ROA for the experiment
    prefix alternates between them.
    """
    if plan.pv_origins is None:
        raise ValueError("plan has no pv_origins")
    plan.check_driver(driver.max_roa_delay)
    pr, pe = plan.reference_prefix, plan.experiment_prefix
    a, b = plan.pv_origins

    driver.set_roas(plan.pv_roas(None))
    driver.wait(plan.hold)
    phases: list[tuple[str, RibSnapshot]] = []
    for o in (a, b):
        driver.announce(pr, o)
        driver.announce(pe, o)
        driver.wait(plan.hold)
        phases.append((f"exclusive:{o}", driver.snapshot()))
        driver.withdraw(pr, o)
        driver.withdraw(pe, o)
        driver.wait(plan.hold)
    for o in (a, b):
        driver.announce(pr, o)
        driver.announce(pe, o)
    driver.wait(plan.hold)
    phases.append(("baseline", driver.snapshot()))
    for i, config in enumerate(plan.pv_schedule, start=1):
        driver.set_roas(plan.pv_roas(config))
        driver.wait(plan.hold)
        phases.append((f"{config}#{i}", driver.snapshot()))

    vps = _vps(*(s for _, s in phases))
    observations = [
        PvObservation(vp, name, route_path(s, vp, pr), route_path(s, vp, pe))
        for name, s in phases
        for vp in vps
    ]
    by_vp: dict[VantagePoint, dict[str, PvObservation]] = defaultdict(dict)
    for o in observations:
        by_vp[o.vp][o.phase] = o

    excluded: dict[VantagePoint, str] = {}
    filter_obs: list[Observation] = []
    for vp in vps:
        for n, origin in enumerate((a, b), start=1):
            o = by_vp[vp][f"exclusive:{origin}"]
            if o.reference_path is None or o.reference_origin != origin:
                excluded.setdefault(vp, f"no reference route from AS{origin}")
                continue
            if o.experiment_path is None:
                cls = O3
            elif o.experiment_path != o.reference_path:
                cls = O2
            else:
                cls = O1
            filter_obs.append(Observation(vp, n, f"exclusive:{origin}", cls, None,
                                          o.reference_path, o.reference_path, o.experiment_path))
            if cls != O1:
                excluded.setdefault(vp, f"invalid route from AS{origin} not received")

    inference = infer_filtering(filter_obs, driver.via_route_server)
    tracking: dict[VantagePoint, str] = {}
    live = ["baseline"] + [f"{c}#{i}" for i, c in enumerate(plan.pv_schedule, start=1)]
    for vp in vps:
        if vp in excluded:
            continue
        seq = [by_vp[vp][p] for p in live]
        if len({o.reference_path for o in seq}) != 1 or seq[0].reference_path is None:
            excluded[vp] = "reference route changed"
            continue
        tracks = True
        targets: set[int] = set()
        paths: dict[int, Path] = {}
        for prev, cur, config in zip(seq, seq[1:], plan.pv_schedule):
            want = plan.pv_valid_origin(config)
            got = cur.experiment_origin
            if got != want:
                tracks = False
            if got is not None and cur.experiment_path is not None:
                paths[got] = cur.experiment_path
            if got != prev.experiment_origin and got == want:
                targets.add(want)
        if tracks and targets == {a, b}:
            strength = "strong"
        elif targets:
            strength = "weak"
        else:
            strength = "none"
        tracking[vp] = strength
        if strength == "none" or a not in paths or b not in paths:
            continue
        decider, cands = _divergence_candidates(vp.peer_asn, paths[a], paths[b])
        if len(cands) == 1:
            v = inference.verdicts.get(decider)
            if v is None or v.policy != "prefer_valid":
                if v is not None:
                    log.warning("AS%d has both filtering and prefer-valid evidence", decider)
                inference.verdicts[decider] = Verdict(decider, "prefer_valid", strength=strength,
                                                      evidence=[str(vp)])
            else:
                v.evidence.append(str(vp))
                if strength == "strong":
                    v.strength = "strong"
        inference.candidate_sets.append(
            CandidateSet(vp, cands, "prefer_valid", 1, 1.0, True, len(cands) == 1)
        )
    inference.no_rov_observed -= set(inference.verdicts)
    return PreferValidResult(plan, observations, excluded, filter_obs, inference, tracking)
