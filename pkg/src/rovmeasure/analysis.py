"""How much the passive inference depends on which vantage points you have.

* :func:`sample_vps` reruns the inference on random VP subsets and counts
  ASes classified enforcing in a subset but non-enforcing on the full data.
* :func:`prefix_visibility` measures how much of each origin a VP sees.
* :func:`coverage` and :func:`divergence` look for the traffic-engineering
  signature: an invalid more-specific next to a non-invalid covering prefix
  from the same origin, with paths that split near the origin.

CSV column layouts are versioned through :data:`SCHEMA_VERSION`, written as
the first column of every row.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .rib import AsRelationships, RibEntry, RibSnapshot, VantagePoint
from .rpki import RoaSet, ValidationState, covers
from .uncontrolled import Evidence, InferenceResult

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SAME_PATH = "same"


def vp_digest(vps: Iterable[VantagePoint]) -> str:
    h = hashlib.sha256()
    for vp in sorted(vps):
        h.update(str(vp).encode())
        h.update(b"\n")
    return h.hexdigest()[:16]


# --- sampling -----------------------------------------------------------------


@dataclass(frozen=True)
class SampleRow:
    index: int
    non_enforcing: int
    candidates: int
    enforcing: int
    false_positives: tuple[int, ...]
    vp_digest: str

    @property
    def fp_count(self) -> int:
        return len(self.false_positives)

    @property
    def fp_ratio(self) -> float:
        return self.fp_count / self.enforcing if self.enforcing else 0.0


@dataclass
class SampleReport:
    seed: int
    sample_size: int
    population: int
    threshold: int
    full: InferenceResult
    rows: list[SampleRow] = field(default_factory=list)

    def fp_ratios(self) -> np.ndarray:
        return np.array([r.fp_ratio for r in self.rows], dtype=float)

    def share_with_fp_ratio_at_least(self, ratio: float) -> float:
        r = self.fp_ratios()
        return float(np.mean(r >= ratio)) if r.size else 0.0

    def samples_with_false_positives(self) -> int:
        return sum(1 for r in self.rows if r.false_positives)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "sample", "seed", "sample_size", "non_enforcing", "candidates",
                    "enforcing", "false_positives", "fp_ratio", "fp_asns", "vp_digest"])
        for r in self.rows:
            w.writerow([SCHEMA_VERSION, r.index, self.seed, self.sample_size, r.non_enforcing,
                        r.candidates, r.enforcing, r.fp_count, f"{r.fp_ratio:.6f}",
                        ";".join(map(str, r.false_positives)), r.vp_digest])
        return buf.getvalue()


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for sample ``index``; identical however samples are scheduled."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_vps(
    snapshot: RibSnapshot,
    roas: RoaSet,
    rels: AsRelationships | None = None,
    sample_size: int = 44,
    samples: int = 5000,
    seed: int = 0,
    threshold: int = 3,
    transitive_customers: bool = False,
    threads: int = 1,
) -> SampleReport:
    vps = snapshot.vantage_points
    if sample_size > len(vps):
        raise ValueError(f"sample size {sample_size} exceeds the {len(vps)} vantage points available")
    if sample_size < 1 or samples < 1:
        raise ValueError("sample size and sample count must be positive")
    evidence = Evidence(snapshot, roas, rels, transitive_customers, threads)
    full = evidence.result(threshold=threshold)

    def one(i: int) -> SampleRow:
        idx = np.sort(sample_rng(seed, i).choice(len(vps), size=sample_size, replace=False))
        chosen = [vps[j] for j in idx]
        res = evidence.result(chosen, threshold)
        fps = tuple(sorted(res.enforcing & full.non_enforcing))
        return SampleRow(i, len(res.non_enforcing), len(res.candidates), len(res.enforcing), fps,
                         vp_digest(chosen))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(samples)))
    else:
        rows = [one(i) for i in range(samples)]
    return SampleReport(seed, sample_size, len(vps), threshold, full, rows)


# --- visibility ---------------------------------------------------------------


@dataclass
class VisibilityReport:
    vps: list[VantagePoint]
    invalid_prefixes: dict[VantagePoint, int]
    invalid_origins: dict[VantagePoint, int]
    completeness: dict[VantagePoint, dict[int, float]]
    min_origins: int = 3

    @property
    def share_below_min_origins(self) -> float:
        if not self.vps:
            return 0.0
        return sum(self.invalid_origins[v] < self.min_origins for v in self.vps) / len(self.vps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "vp", "invalid_prefixes", "invalid_origins", "origin",
                    "completeness"])
        for vp in self.vps:
            for origin, frac in sorted(self.completeness[vp].items()):
                w.writerow([SCHEMA_VERSION, vp, self.invalid_prefixes[vp], self.invalid_origins[vp],
                            origin, f"{frac:.6f}"])
        return buf.getvalue()


def prefix_visibility(snapshot: RibSnapshot, roas: RoaSet, min_origins: int = 3) -> VisibilityReport:
    """Per VP: invalid prefixes and origins seen, and per-origin share of prefixes visible."""
    global_prefixes: dict[int, set] = defaultdict(set)
    local: dict[VantagePoint, dict[int, set]] = defaultdict(lambda: defaultdict(set))
    inv_prefixes: dict[VantagePoint, set] = defaultdict(set)
    inv_origins: dict[VantagePoint, set] = defaultdict(set)
    for e, state in snapshot.validated(roas):
        global_prefixes[e.origin].add(e.prefix)
        local[e.vp][e.origin].add(e.prefix)
        if state is ValidationState.INVALID:
            inv_prefixes[e.vp].add(e.prefix)
            inv_origins[e.vp].add(e.origin)
    vps = snapshot.vantage_points
    completeness = {
        vp: {o: len(p) / len(global_prefixes[o]) for o, p in local[vp].items()} for vp in vps
    }
    return VisibilityReport(
        vps,
        {vp: len(inv_prefixes[vp]) for vp in vps},
        {vp: len(inv_origins[vp]) for vp in vps},
        completeness,
        min_origins,
    )


# --- coverage and divergence --------------------------------------------------


@dataclass(frozen=True)
class CoveragePair:
    vp: VantagePoint
    invalid: RibEntry
    covering: RibEntry


@dataclass
class CoverageReport:
    vps: list[VantagePoint]
    invalid_counts: dict[VantagePoint, int]
    covered_counts: dict[VantagePoint, int]
    pairs: list[CoveragePair]
    histogram: Counter = field(default_factory=Counter)

    def fraction(self, vp: VantagePoint) -> float | None:
        n = self.invalid_counts.get(vp, 0)
        return self.covered_counts.get(vp, 0) / n if n else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "vp", "invalid_prefixes", "covered", "fraction"])
        for vp in self.vps:
            f = self.fraction(vp)
            w.writerow([SCHEMA_VERSION, vp, self.invalid_counts[vp], self.covered_counts[vp],
                        "" if f is None else f"{f:.6f}"])
        return buf.getvalue()

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "bucket", "pairs"])
        for bucket in sorted_buckets(self.histogram):
            w.writerow([SCHEMA_VERSION, bucket, self.histogram[bucket]])
        return buf.getvalue()


def sorted_buckets(hist) -> list:
    numeric = sorted(k for k in hist if k != SAME_PATH)
    return ([SAME_PATH] if SAME_PATH in hist else []) + numeric


def coverage(snapshot: RibSnapshot, roas: RoaSet) -> CoverageReport:
    """Share of each VP's invalid prefixes that sit under a non-invalid, same-origin covering route."""
    states = dict(snapshot.validated(roas))
    vps = snapshot.vantage_points
    invalid_counts: dict[VantagePoint, int] = {}
    covered_counts: dict[VantagePoint, int] = {}
    pairs: list[CoveragePair] = []
    for vp in vps:
        invalid_n = covered_n = 0
        for origin in sorted({e.origin for e in snapshot.by_vp(vp)}):
            entries = snapshot.by_vp_origin(vp, origin)
            good = [e for e in entries if states[e] is not ValidationState.INVALID]
            for bad in (e for e in entries if states[e] is ValidationState.INVALID):
                invalid_n += 1
                cover = [
                    g for g in good
                    if g.prefix.version == bad.prefix.version
                    and g.prefix.length < bad.prefix.length
                    and covers(g.prefix, bad.prefix)
                ]
                if cover:
                    covered_n += 1
                    pairs.extend(CoveragePair(vp, bad, g) for g in cover)
        invalid_counts[vp] = invalid_n
        covered_counts[vp] = covered_n
    return CoverageReport(vps, invalid_counts, covered_counts, pairs)


def divergence_hop(a: Sequence[int], b: Sequence[int]) -> str | int:
    """Where two paths part, counted from the origin (origin = 0, its neighbor = 1).

    When one path is an origin-side prefix of the other, they part at the
    first hop the shorter one lacks.
    """
    ra, rb = list(reversed(a)), list(reversed(b))
    if ra == rb:
        return SAME_PATH
    for i, (x, y) in enumerate(zip(ra, rb)):
        if x != y:
            return i
    return min(len(ra), len(rb))


def divergence(snapshot: RibSnapshot, roas: RoaSet, report: CoverageReport | None = None) -> CoverageReport:
    report = report or coverage(snapshot, roas)
    report.histogram = Counter(
        divergence_hop(p.invalid.path.compressed().asns, p.covering.path.compressed().asns)
        for p in report.pairs
    )
    return report
