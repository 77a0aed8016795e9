"""Vantage-point RIB snapshots and AS relationship data.

The canonical input is JSON Lines, one route per line::

    {"collector": "rrc00", "peer_asn": 64500, "peer_id": "192.0.2.1",
     "prefix": "10.0.0.0/16", "path": [64501, 64502], "ts": 1477411200}

``path`` lists the vantage point's neighbor first and the origin last.
An element that is itself a list is an AS_SET; such routes are skipped.
"""
from __future__ import annotations

import enum
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

from ._io import open_text
from .rpki import IpPrefix, RoaSet, ValidationState, validate

log = logging.getLogger(__name__)


class RibParseError(ValueError):
    pass


class RelationshipConflict(ValueError):
    def __init__(self, a: int, b: int, detail: str) -> None:
        super().__init__(f"conflicting relationship for AS{a}-AS{b}: {detail}")
        self.pair = (a, b)


@dataclass(frozen=True, order=True)
class VantagePoint:
    """One BGP session feeding a route collector."""

    collector: str
    peer_asn: int
    peer_id: str

    def __str__(self) -> str:
        return f"{self.collector}:AS{self.peer_asn}:{self.peer_id}"


def compress_prepending(path):
    """Collapse runs of the same ASN (AS path prepending).

    Accepts an :class:`AsPath` (returning an ``AsPath``) or a plain sequence
    (returning a tuple).
    """
    if isinstance(path, AsPath):
        return path.compressed()
    return _collapse(path)


def _collapse(asns: Sequence[int]) -> tuple[int, ...]:
    out: list[int] = []
    for a in asns:
        if not out or out[-1] != a:
            out.append(a)
    return tuple(out)


@dataclass(frozen=True, order=True)
class AsPath:
    """AS path as seen at a vantage point: neighbor first, origin last."""

    asns: tuple[int, ...]
    prepend_compressed: bool = False

    def __post_init__(self) -> None:
        if not self.asns:
            raise ValueError("empty AS path")
        if self.prepend_compressed and any(a == b for a, b in zip(self.asns, self.asns[1:])):
            raise ValueError("path marked compressed contains repeated ASNs")

    @classmethod
    def of(cls, asns: Iterable[int]) -> "AsPath":
        t = tuple(int(a) for a in asns)
        return cls(t, prepend_compressed=t == _collapse(t))

    @property
    def origin(self) -> int:
        return self.asns[-1]

    def compressed(self) -> "AsPath":
        if self.prepend_compressed:
            return self
        return AsPath(_collapse(self.asns), True)

    def __len__(self) -> int:
        return len(self.asns)

    def __iter__(self) -> Iterator[int]:
        return iter(self.asns)

    def __str__(self) -> str:
        return " ".join(map(str, self.asns))


@dataclass(frozen=True, order=True)
class RibEntry:
    vp: VantagePoint
    prefix: IpPrefix
    path: AsPath
    timestamp: int = 0

    @property
    def origin(self) -> int:
        return self.path.origin

    def to_json(self) -> str:
        return json.dumps(
            {
                "collector": self.vp.collector,
                "peer_asn": self.vp.peer_asn,
                "peer_id": self.vp.peer_id,
                "prefix": str(self.prefix),
                "path": list(self.path.asns),
                "ts": self.timestamp,
            },
            separators=(",", ":"),
        )


@dataclass
class ParseStats:
    records: int = 0
    loaded: int = 0
    as_set: int = 0
    duplicates: int = 0
    malformed: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return self.as_set + self.duplicates

    def to_json(self) -> dict:
        return {
            "records": self.records,
            "loaded": self.loaded,
            "as_set": self.as_set,
            "duplicates": self.duplicates,
            "malformed": self.malformed,
            "errors": [f"line {n}: {msg}" for n, msg in self.errors],
        }


class RibSnapshot:
    """Immutable set of RIB entries with lookup indexes.

    At most one entry per (vantage point, prefix); entries are kept in sorted order.
    """

    def __init__(self, entries: Iterable[RibEntry] = (), stats: ParseStats | None = None) -> None:
        latest: dict[tuple[VantagePoint, IpPrefix], RibEntry] = {}
        dups = 0
        for e in entries:
            k = (e.vp, e.prefix)
            prev = latest.get(k)
            if prev is not None:
                dups += 1
                if (prev.timestamp, prev.path) >= (e.timestamp, e.path):
                    continue
            latest[k] = e
        self.entries: tuple[RibEntry, ...] = tuple(sorted(latest.values()))
        self.stats = stats if stats is not None else ParseStats(
            records=len(self.entries) + dups, loaded=len(self.entries), duplicates=dups
        )
        by_vp: dict[VantagePoint, list[RibEntry]] = defaultdict(list)
        by_vp_origin: dict[tuple[VantagePoint, int], list[RibEntry]] = defaultdict(list)
        by_prefix: dict[IpPrefix, list[RibEntry]] = defaultdict(list)
        for e in self.entries:
            by_vp[e.vp].append(e)
            by_vp_origin[(e.vp, e.origin)].append(e)
            by_prefix[e.prefix].append(e)
        self._by_vp = {k: tuple(v) for k, v in by_vp.items()}
        self._by_vp_origin = {k: tuple(v) for k, v in by_vp_origin.items()}
        self._by_prefix = {k: tuple(v) for k, v in by_prefix.items()}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[RibEntry]:
        return iter(self.entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RibSnapshot) and self.entries == other.entries

    def __repr__(self) -> str:
        return f"RibSnapshot({len(self.entries)} entries, {len(self._by_vp)} VPs)"

    @property
    def vantage_points(self) -> list[VantagePoint]:
        return sorted(self._by_vp)

    def by_vp(self, vp: VantagePoint) -> tuple[RibEntry, ...]:
        return self._by_vp.get(vp, ())

    def by_vp_origin(self, vp: VantagePoint, origin: int) -> tuple[RibEntry, ...]:
        return self._by_vp_origin.get((vp, origin), ())

    def by_prefix(self, prefix: IpPrefix) -> tuple[RibEntry, ...]:
        return self._by_prefix.get(prefix, ())

    def route(self, vp: VantagePoint, prefix: IpPrefix) -> RibEntry | None:
        for e in self.by_vp(vp):
            if e.prefix == prefix:
                return e
        return None

    def restrict(self, vps: Iterable[VantagePoint]) -> "RibSnapshot":
        keep = set(vps)
        return RibSnapshot(e for e in self.entries if e.vp in keep)

    def validated(self, roas: RoaSet) -> list[tuple[RibEntry, ValidationState]]:
        return [(e, validate(e.origin, e.prefix, roas)) for e in self.entries]

    def write_jsonl(self, stream: TextIO) -> None:
        for e in self.entries:
            stream.write(e.to_json())
            stream.write("\n")


_FIELDS = ("collector", "peer_asn", "peer_id", "prefix", "path", "ts")


class _AsSetPath(Exception):
    pass


def _parse_record(line: str) -> RibEntry:
    rec = json.loads(line)
    if not isinstance(rec, dict):
        raise ValueError("record is not an object")
    missing = [k for k in _FIELDS if k not in rec]
    if missing:
        raise ValueError(f"missing fields {missing}")
    path = rec["path"]
    if not isinstance(path, list) or not path:
        raise ValueError("path must be a non-empty list")
    if any(isinstance(a, list) for a in path):
        raise _AsSetPath()
    if not all(isinstance(a, int) and not isinstance(a, bool) and 0 <= a < 2**32 for a in path):
        raise ValueError("path elements must be AS numbers")
    peer_asn = rec["peer_asn"]
    if not isinstance(peer_asn, int) or isinstance(peer_asn, bool):
        raise ValueError("peer_asn must be an integer")
    ts = rec["ts"]
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise ValueError("ts must be an integer")
    vp = VantagePoint(str(rec["collector"]), peer_asn, str(rec["peer_id"]))
    return RibEntry(vp, IpPrefix.parse(str(rec["prefix"])), AsPath.of(path), ts)


def parse_snapshot(stream: Iterable[str], max_malformed: float = 0.10) -> RibSnapshot:
    """Load a JSONL RIB stream.

    Malformed lines and AS_SET paths are counted rather than fatal, unless the
    malformed share exceeds ``max_malformed``.
    """
    stats = ParseStats()
    entries: list[RibEntry] = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        stats.records += 1
        try:
            entries.append(_parse_record(line))
        except _AsSetPath:
            stats.as_set += 1
        except (ValueError, TypeError) as exc:
            stats.malformed += 1
            if len(stats.errors) < 20:
                stats.errors.append((lineno, str(exc)))
    if stats.records and stats.malformed / stats.records > max_malformed:
        detail = "; ".join(f"line {n}: {msg}" for n, msg in stats.errors[:5])
        raise RibParseError(
            f"{stats.malformed} of {stats.records} records malformed "
            f"(limit {max_malformed:.0%}): {detail}"
        )
    snap = RibSnapshot(entries)
    stats.duplicates = snap.stats.duplicates
    stats.loaded = len(snap)
    snap.stats = stats
    if stats.malformed or stats.as_set or stats.duplicates:
        log.info(
            "loaded %d routes; skipped %d AS_SET, %d duplicate, %d malformed",
            stats.loaded, stats.as_set, stats.duplicates, stats.malformed,
        )
    return snap


def load_snapshot(path, max_malformed: float = 0.10) -> RibSnapshot:
    with open_text(path) as fh:
        return parse_snapshot(fh, max_malformed)


class Relationship(enum.Enum):
    PROVIDER_OF = "provider_of"
    CUSTOMER_OF = "customer_of"
    PEER = "peer"

    def inverse(self) -> "Relationship":
        if self is Relationship.PROVIDER_OF:
            return Relationship.CUSTOMER_OF
        if self is Relationship.CUSTOMER_OF:
            return Relationship.PROVIDER_OF
        return self


class AsRelationships:
    """Business relationships between AS pairs, stored in both directions."""

    def __init__(self) -> None:
        self._rel: dict[tuple[int, int], Relationship] = {}
        self._customers: dict[int, set[int]] = defaultdict(set)

    def add(self, a: int, b: int, rel: Relationship) -> None:
        """Record ``a rel b`` (e.g. a PROVIDER_OF b) and its inverse."""
        if a == b:
            raise RelationshipConflict(a, b, "self relationship")
        prev = self._rel.get((a, b))
        if prev is not None:
            if prev is not rel:
                raise RelationshipConflict(a, b, f"{prev.value} vs {rel.value}")
            return
        self._rel[(a, b)] = rel
        self._rel[(b, a)] = rel.inverse()
        if rel is Relationship.PROVIDER_OF:
            self._customers[a].add(b)
        elif rel is Relationship.CUSTOMER_OF:
            self._customers[b].add(a)

    def relationship(self, a: int, b: int) -> Relationship | None:
        return self._rel.get((a, b))

    def customers(self, asn: int) -> frozenset[int]:
        return frozenset(self._customers.get(asn, ()))

    def customer_cone(self, asn: int) -> frozenset[int]:
        """All direct and indirect customers of ``asn`` (excluding itself)."""
        seen: set[int] = set()
        stack = list(self._customers.get(asn, ()))
        while stack:
            c = stack.pop()
            if c in seen or c == asn:
                continue
            seen.add(c)
            stack.extend(self._customers.get(c, ()))
        return frozenset(seen)

    def pairs(self) -> Iterator[tuple[int, int, Relationship]]:
        """Each unordered pair once, in CAIDA orientation."""
        for (a, b), rel in sorted(self._rel.items()):
            if rel is Relationship.PROVIDER_OF or (rel is Relationship.PEER and a < b):
                yield a, b, rel

    def __len__(self) -> int:
        return len(self._rel) // 2

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AsRelationships) and self._rel == other._rel

    def write(self, stream: TextIO) -> None:
        for a, b, rel in self.pairs():
            stream.write(f"{a}|{b}|{-1 if rel is Relationship.PROVIDER_OF else 0}\n")


def parse_relationships(stream: Iterable[str]) -> AsRelationships:
    """Parse CAIDA serial format ``a|b|rel[|source]``; -1 means a is b's provider, 0 peers."""
    rels = AsRelationships()
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) < 3:
            raise ValueError(f"line {lineno}: expected a|b|rel, got {line!r}")
        a, b, code = int(parts[0]), int(parts[1]), parts[2].strip()
        if code == "-1":
            rels.add(a, b, Relationship.PROVIDER_OF)
        elif code == "0":
            rels.add(a, b, Relationship.PEER)
        else:
            raise ValueError(f"line {lineno}: unknown relationship code {code!r}")
    return rels


def load_relationships(path) -> AsRelationships:
    with open_text(path) as fh:
        return parse_relationships(fh)
