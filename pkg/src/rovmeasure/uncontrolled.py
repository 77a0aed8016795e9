"""Passive ROV inference from vantage-point RIBs.

Three steps, each a union over per-vantage-point evidence:

1. every AS on the path of an Invalid route is *non-enforcing*, except for
   routes originated by the vantage point's AS or one of its customers;
2. for each origin seen with both Invalid and non-invalid routes at a vantage
   point, an AS that is the single member of (non-invalid path minus invalid
   path) and not non-enforcing becomes a *candidate* for that origin;
3. candidates for at least ``threshold`` origins are *enforcing*.

The vantage point's own AS and the origin are never flagged or marked.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

from .rib import AsRelationships, RibEntry, RibSnapshot, VantagePoint
from .rpki import RoaSet, ValidationState, validate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VpEvidence:
    """What one vantage point contributes to steps 1 and 2.

    ``pairs`` holds (AS, origin) single-AS differences before the
    non-enforcing filter is applied.
    """

    vp: VantagePoint
    flags: frozenset[int]
    pairs: frozenset[tuple[int, int]]


@dataclass
class InferenceResult:
    non_enforcing: set[int]
    candidates: dict[int, set[int]]
    enforcing: set[int]
    threshold: int

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "non_enforcing": sorted(self.non_enforcing),
            "candidates": {str(a): sorted(o) for a, o in sorted(self.candidates.items())},
            "enforcing": sorted(self.enforcing),
        }


def _exempt_origins(vp_asn: int, rels: AsRelationships | None, transitive: bool) -> frozenset[int]:
    if rels is None:
        return frozenset([vp_asn])
    cust = rels.customer_cone(vp_asn) if transitive else rels.customers(vp_asn)
    return cust | {vp_asn}


def vp_evidence(
    vp: VantagePoint,
    routes: Iterable[tuple[RibEntry, ValidationState]],
    rels: AsRelationships | None = None,
    transitive_customers: bool = False,
) -> VpEvidence:
    me = vp.peer_asn
    exempt = _exempt_origins(me, rels, transitive_customers)
    flags: set[int] = set()
    valid_paths: dict[int, set[frozenset[int]]] = defaultdict(set)
    invalid_paths: dict[int, set[frozenset[int]]] = defaultdict(set)
    for entry, state in routes:
        origin = entry.origin
        members = frozenset(entry.path.asns) - {me, origin}
        if state is ValidationState.INVALID:
            invalid_paths[origin].add(members)
            if origin not in exempt:
                flags |= members
        else:
            valid_paths[origin].add(members)
    pairs: set[tuple[int, int]] = set()
    for origin, bad in invalid_paths.items():
        for good in valid_paths.get(origin, ()):
            for b in bad:
                diff = good - b
                if len(diff) == 1:
                    pairs.add((next(iter(diff)), origin))
    return VpEvidence(vp, frozenset(flags), frozenset(pairs))


class Evidence:
    """Per-VP evidence for a snapshot, reusable across VP subsets."""

    def __init__(
        self,
        snapshot: RibSnapshot,
        roas: RoaSet,
        rels: AsRelationships | None = None,
        transitive_customers: bool = False,
        threads: int = 1,
    ) -> None:
        if rels is None:
            log.warning("no relationship data: customer exception limited to the VP's own AS")
        states = {e: validate(e.origin, e.prefix, roas) for e in snapshot}

        def one(vp: VantagePoint) -> VpEvidence:
            return vp_evidence(
                vp, ((e, states[e]) for e in snapshot.by_vp(vp)), rels, transitive_customers
            )

        vps = snapshot.vantage_points
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                found = list(pool.map(one, vps))
        else:
            found = [one(vp) for vp in vps]
        self.by_vp: dict[VantagePoint, VpEvidence] = {ev.vp: ev for ev in found}

    @property
    def vantage_points(self) -> list[VantagePoint]:
        return sorted(self.by_vp)

    def result(self, vps: Iterable[VantagePoint] | None = None, threshold: int = 3) -> InferenceResult:
        chosen = [self.by_vp[v] for v in (self.by_vp if vps is None else vps)]
        flagged = merge_flags(chosen)
        cands = merge_candidates(chosen, flagged)
        return InferenceResult(flagged, cands, classify(cands, threshold), threshold)


def merge_flags(evidence: Iterable[VpEvidence]) -> set[int]:
    out: set[int] = set()
    for ev in evidence:
        out |= ev.flags
    return out


def merge_candidates(evidence: Iterable[VpEvidence], flagged: set[int]) -> dict[int, set[int]]:
    out: dict[int, set[int]] = defaultdict(set)
    for ev in evidence:
        for asn, origin in ev.pairs:
            if asn not in flagged:
                out[asn].add(origin)
    return dict(out)


def flag_non_enforcing(
    snapshot: RibSnapshot,
    roas: RoaSet,
    rels: AsRelationships | None = None,
    transitive_customers: bool = False,
) -> set[int]:
    return merge_flags(Evidence(snapshot, roas, rels, transitive_customers).by_vp.values())


def mark_candidates(
    snapshot: RibSnapshot, roas: RoaSet, flagged: set[int]
) -> dict[int, set[int]]:
    # the customer exception only affects flags, so relationships are not needed here
    ev = Evidence(snapshot, roas, rels=AsRelationships())
    return merge_candidates(ev.by_vp.values(), flagged)


def classify(candidates: Mapping[int, set[int]], threshold: int = 3) -> set[int]:
    if threshold < 1:
        raise ValueError("threshold must be at least 1")
    return {asn for asn, origins in candidates.items() if len(origins) >= threshold}


def infer(
    snapshot: RibSnapshot,
    roas: RoaSet,
    rels: AsRelationships | None = None,
    threshold: int = 3,
    transitive_customers: bool = False,
    threads: int = 1,
) -> InferenceResult:
    """Run all three steps on ``snapshot``."""
    ev = Evidence(snapshot, roas, rels, transitive_customers, threads)
    return ev.result(threshold=threshold)
