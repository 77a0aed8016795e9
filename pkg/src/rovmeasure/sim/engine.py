"""Discrete-event BGP propagation with per-AS route origin validation.

Each prefix converges independently through synchronous rounds: every AS
whose inputs changed re-runs best-path selection against the routes its
neighbors exported in the previous round.  Selection order is

    [validity]  local-pref (customer > peer > provider)  [validity]
    shortest path  lowest neighbor ASN

where validity (Valid > NotFound > Invalid) only appears for prefer-valid
ASes, above or below local-pref according to the node's configuration.

ROA changes reach each AS after its own propagation delay.  On arrival a
revalidating AS re-checks every route it holds; a non-revalidating one keeps
the validity recorded when each route was received and only checks routes
that arrive afterwards.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from ..rib import AsPath, RibEntry, RibSnapshot, VantagePoint
from ..rpki import IpPrefix, RoaSet, ValidationState, Vrp, as_prefix, validate
from .topology import (
    CUSTOMER,
    LOCAL_PREF,
    PEER,
    PROVIDER,
    PolicyScope,
    RovPolicy,
    Topology,
    ValidityRank,
)

_VALIDITY_RANK = {ValidationState.VALID: 2, ValidationState.NOT_FOUND: 1, ValidationState.INVALID: 0}


class ConvergenceError(RuntimeError):
    def __init__(self, prefix: IpPrefix, asn: int, rounds: int) -> None:
        super().__init__(f"{prefix} did not converge after {rounds} rounds; AS{asn} keeps changing")
        self.prefix = prefix
        self.asn = asn


class Route(NamedTuple):
    """A route held by an AS: ``path`` runs neighbor first, origin last.

    Locally originated routes have an empty path and no neighbor.
    """

    path: tuple[int, ...]
    neighbor: int | None
    learned_from: str | None
    state: ValidationState | None

    @property
    def origin(self) -> int | None:
        return self.path[-1] if self.path else None


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str  # announce | withdraw | roa_update
    prefix: IpPrefix | None = None
    origin: int | None = None
    sessions: frozenset[int] | None = None
    add: tuple[Vrp, ...] = ()
    remove: tuple[Vrp, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("announce", "withdraw", "roa_update"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind != "roa_update" and (self.prefix is None or self.origin is None):
            raise ValueError(f"{self.kind} needs a prefix and an origin")

    @classmethod
    def announce(cls, time: float, prefix, origin: int, sessions: Iterable[int] | None = None):
        return cls(time, "announce", as_prefix(prefix), origin,
                   None if sessions is None else frozenset(sessions))

    @classmethod
    def withdraw(cls, time: float, prefix, origin: int):
        return cls(time, "withdraw", as_prefix(prefix), origin)

    @classmethod
    def roa_update(cls, time: float, add: Iterable[Vrp] = (), remove: Iterable[Vrp] = ()):
        return cls(time, "roa_update", add=tuple(sorted(add)), remove=tuple(sorted(remove)))

    def to_json(self) -> dict:
        d: dict = {"time": self.time, "kind": self.kind}
        if self.kind == "roa_update":
            d["add"] = [_vrp_json(v) for v in self.add]
            d["remove"] = [_vrp_json(v) for v in self.remove]
        else:
            d["prefix"] = str(self.prefix)
            d["origin"] = self.origin
            if self.kind == "announce":
                d["sessions"] = None if self.sessions is None else sorted(self.sessions)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SimEvent":
        kind = d["kind"]
        t = float(d["time"])
        if kind == "roa_update":
            return cls.roa_update(t, [_vrp_from_json(v) for v in d.get("add", ())],
                                  [_vrp_from_json(v) for v in d.get("remove", ())])
        if kind == "announce":
            return cls.announce(t, d["prefix"], int(d["origin"]), d.get("sessions"))
        if kind == "withdraw":
            return cls.withdraw(t, d["prefix"], int(d["origin"]))
        raise ValueError(f"unknown event kind {kind!r}")


def _vrp_json(v: Vrp) -> dict:
    return {"prefix": str(v.prefix), "maxlen": v.max_length, "asn": v.asn}


def _vrp_from_json(d: dict) -> Vrp:
    return Vrp.make(d["prefix"], d["asn"], d.get("maxlen"))


# prefix -> AS -> selected route
RoutingState = dict[IpPrefix, dict[int, Route]]


@dataclass
class _PrefixState:
    best: dict[int, Route] = field(default_factory=dict)
    # AS -> neighbor -> (path, validity recorded on receipt)
    adj_in: dict[int, dict[int, tuple[tuple[int, ...], ValidationState | None]]] = field(
        default_factory=dict
    )
    # origin AS -> sessions it announces to (None = every neighbor)
    origins: dict[int, frozenset[int] | None] = field(default_factory=dict)


class Simulator:
    """Incremental simulator; use :func:`run` for a one-shot timeline."""

    def __init__(self, topology: Topology, roas: RoaSet | None = None, max_rounds: int | None = None):
        self.topology = topology
        self.now = 0.0
        initial = roas if roas is not None else RoaSet()
        self.roas = initial
        self.views: dict[int, RoaSet] = {asn: initial for asn in topology.nodes}
        self.max_rounds = max_rounds or 10 * max(len(topology.nodes), 1)
        self._prefixes: dict[IpPrefix, _PrefixState] = {}
        self._queue: list = []
        self._seq = itertools.count()
        self._order = sorted(topology.nodes)

    # scheduling -------------------------------------------------------------

    def schedule(self, event: SimEvent) -> None:
        if event.time < self.now:
            raise ValueError(f"event at t={event.time} is before the current time {self.now}")
        heapq.heappush(self._queue, (event.time, next(self._seq), "event", event))

    def pending(self) -> bool:
        return bool(self._queue)

    def advance_to(self, t: float) -> list[float]:
        """Process everything due at or before ``t``; returns the times processed."""
        times = []
        while self._queue and self._queue[0][0] <= t:
            now = self._queue[0][0]
            self.now = now
            while self._queue and self._queue[0][0] == now:
                _, _, kind, item = heapq.heappop(self._queue)
                if kind == "event":
                    self._apply(item)
                else:
                    self._arrive(*item)
            times.append(now)
        self.now = max(self.now, t)
        return times

    # event handling ---------------------------------------------------------

    def _apply(self, ev: SimEvent) -> None:
        if ev.kind == "roa_update":
            self.roas = self.roas.with_changes(ev.add, ev.remove)
            for asn in self._order:
                at = ev.time + self.topology.roa_delay(asn)
                heapq.heappush(self._queue, (at, next(self._seq), "arrive", (asn, ev.add, ev.remove)))
            return
        if ev.origin not in self.topology.nodes:
            raise ValueError(f"origin AS{ev.origin} is not in the topology")
        ps = self._prefixes.setdefault(ev.prefix, _PrefixState())
        if ev.kind == "announce":
            ps.origins[ev.origin] = ev.sessions
        else:
            ps.origins.pop(ev.origin, None)
        # re-export even when the best route stays local (sessions may differ)
        self._converge(ev.prefix, ps, {ev.origin}, force_export={ev.origin})

    def _arrive(self, asn: int, add: Sequence[Vrp], remove: Sequence[Vrp]) -> None:
        self.views[asn] = self.views[asn].with_changes(add, remove)
        node = self.topology.nodes[asn]
        if not node.does_rov or not node.revalidates_on_roa_change:
            return
        view = self.views[asn]
        for prefix in sorted(self._prefixes):
            ps = self._prefixes[prefix]
            held = ps.adj_in.get(asn)
            if not held:
                continue
            for nbr, (path, _) in list(held.items()):
                held[nbr] = (path, validate(path[-1], prefix, view))
            self._converge(prefix, ps, {asn})

    # route selection --------------------------------------------------------

    def _policy_applies(self, asn: int, nbr: int) -> bool:
        node = self.topology.nodes[asn]
        if node.policy_scope is PolicyScope.ALL_SESSIONS:
            return True
        if node.policy_scope is PolicyScope.ROUTE_SERVER_SESSIONS_ONLY:
            return self.topology.via_route_server(asn, nbr)
        return nbr in node.listed_sessions

    def _select(self, asn: int, ps: _PrefixState) -> Route | None:
        if asn in ps.origins:
            return Route((), None, None, None)
        node = self.topology.nodes[asn]
        rels = self.topology.neighbors[asn]
        best_key = None
        best = None
        for nbr, (path, state) in ps.adj_in.get(asn, {}).items():
            applies = node.does_rov and self._policy_applies(asn, nbr)
            if applies and node.rov_policy is RovPolicy.FILTER_INVALID and state is ValidationState.INVALID:
                continue
            pref = LOCAL_PREF[rels[nbr]]
            if applies and node.rov_policy is RovPolicy.PREFER_VALID:
                v = _VALIDITY_RANK[state]
            else:
                v = 1
            if node.prefer_valid_rank is ValidityRank.ABOVE_RELATIONSHIP:
                key = (v, pref, -len(path), -nbr)
            else:
                key = (pref, v, -len(path), -nbr)
            if best_key is None or key > best_key:
                best_key = key
                best = Route(path, nbr, rels[nbr], state)
        return best

    def _export(self, asn: int, route: Route | None, ps: _PrefixState) -> dict[int, tuple[int, ...]]:
        """Paths ``asn`` sends to each neighbor given its selected route."""
        if route is None:
            return {}
        rels = self.topology.neighbors[asn]
        if route.neighbor is None:
            sessions = ps.origins.get(asn)
            targets = [n for n in rels if sessions is None or n in sessions]
        elif route.learned_from == CUSTOMER:
            targets = [n for n in rels if n not in route.path]
        else:
            targets = [n for n, r in rels.items() if r == CUSTOMER and n not in route.path]
        out_path = (asn,) + route.path
        return {n: out_path for n in targets}

    def _receive(self, asn: int, nbr: int, path: tuple[int, ...] | None, prefix: IpPrefix,
                 ps: _PrefixState) -> bool:
        held = ps.adj_in.setdefault(asn, {})
        old = held.get(nbr)
        if path is None or asn in path:
            if old is None:
                return False
            del held[nbr]
            return True
        if old is not None and old[0] == path:
            return False
        state = validate(path[-1], prefix, self.views[asn]) if self.topology.nodes[asn].does_rov else None
        held[nbr] = (path, state)
        return True

    def _converge(self, prefix: IpPrefix, ps: _PrefixState, dirty: set[int],
                  force_export: set[int] = frozenset()) -> None:
        rounds = 0
        exported = force_export
        while dirty or exported:
            rounds += 1
            if rounds > self.max_rounds:
                raise ConvergenceError(prefix, min(dirty or exported), rounds - 1)
            changed = set(exported)
            updates = {}
            for asn in sorted(dirty):
                new = self._select(asn, ps)
                if new != ps.best.get(asn):
                    updates[asn] = new
            for asn, new in updates.items():
                if new is None:
                    ps.best.pop(asn, None)
                else:
                    ps.best[asn] = new
                changed.add(asn)
            dirty = set()
            for asn in sorted(changed):
                offers = self._export(asn, ps.best.get(asn), ps)
                for nbr in self.topology.neighbors[asn]:
                    if self._receive(nbr, asn, offers.get(nbr), prefix, ps):
                        dirty.add(nbr)
            exported = set()

    # inspection -------------------------------------------------------------

    def routing_state(self) -> RoutingState:
        return {p: dict(ps.best) for p, ps in sorted(self._prefixes.items())}

    def snapshot(self) -> RibSnapshot:
        return state_snapshot(self.topology, self.routing_state(), self.now)


def state_snapshot(topology: Topology, state: RoutingState, time: float) -> RibSnapshot:
    """Export what each vantage-point AS would send a route collector.

    Paths exclude the vantage point's own ASN; a locally originated prefix is
    exported as a one-hop path holding that ASN.
    """
    entries = []
    for asn in topology.vantage_points:
        vp = VantagePoint(topology.collector, asn, str(asn))
        for prefix, routes in state.items():
            r = routes.get(asn)
            if r is None:
                continue
            entries.append(RibEntry(vp, prefix, AsPath.of(r.path or (asn,)), int(time)))
    return RibSnapshot(entries)


@dataclass
class Timeline:
    topology: Topology
    points: list[tuple[float, RoutingState]]

    def state_at(self, time: float) -> RoutingState:
        current: RoutingState = {}
        for t, state in self.points:
            if t > time:
                break
            current = state
        return current

    def snapshot(self, time: float) -> RibSnapshot:
        return state_snapshot(self.topology, self.state_at(time), time)


def run(topology: Topology, events: Iterable[SimEvent], horizon: float,
        roas: RoaSet | None = None) -> Timeline:
    """Simulate ``events`` up to ``horizon``, recording the converged state after each instant."""
    sim = Simulator(topology, roas)
    for ev in events:
        sim.schedule(ev)
    points: list[tuple[float, RoutingState]] = [(0.0, sim.routing_state())]
    while sim.pending() and sim._queue[0][0] <= horizon:
        t = sim._queue[0][0]
        sim.advance_to(t)
        if points and points[-1][0] == t:
            points[-1] = (t, sim.routing_state())
        else:
            points.append((t, sim.routing_state()))
    return Timeline(topology, points)


def snapshot(timeline: Timeline, time: float) -> RibSnapshot:
    return timeline.snapshot(time)


def valley_free_violations(topology: Topology, state: RoutingState) -> list[tuple[IpPrefix, int, tuple[int, ...]]]:
    """Selected routes whose propagation chain is not valley-free."""
    bad = []
    for prefix, routes in state.items():
        for asn, r in routes.items():
            chain = (asn,) + r.path  # receiver ... origin
            # walk from the origin outward: each hop u -> w
            phase = 0  # 0 climbing, 1 after the peer hop or first descent
            ok = True
            for w, u in zip(reversed(chain[:-1]), reversed(chain[1:])):
                rel = topology.relationship(u, w)
                if rel is None:
                    ok = False
                elif rel == PROVIDER:
                    ok = phase == 0
                elif rel == PEER:
                    ok = phase == 0
                    phase = 1
                else:
                    phase = 1
                if not ok:
                    break
            if not ok:
                bad.append((prefix, asn, r.path))
    return bad
