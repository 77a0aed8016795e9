"""Planted-ground-truth scenarios.

========================  ===================================================
name (alias)              what it plants
========================  ===================================================
adjacent_filterer (a)     filtering AS peering directly with the experiment
                          origin; it is its own vantage point
route_server_filterer (b) AS filtering only on its route-server session, with
                          a direct session that still carries invalid routes
nonadjacent_filterer (c)  filtering AS two hops from the origin;
                          ``nonadjacent_filterer_two_vps`` adds a vantage
                          point on a sibling branch
traffic_engineering (d)   multihomed origins announcing a /16 to one upstream
                          and an uncovered /24 to the other; no ROV anywhere
prefer_valid (e)          AS ranking valid above invalid, between two origins;
                          ``prefer_valid_filter`` swaps in a filtering AS
non_revalidating (f)      filtering AS that does not re-check routes on ROA
                          change; ``revalidating_filterer`` is the control
========================  ===================================================
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from ..experiment.plan import ExperimentPlan
from ..rpki import RoaSet, Vrp
from .engine import SimEvent
from .topology import AsNode, PolicyScope, RovPolicy, Topology, peer, provider

PEERING = 47065
ALT_ORIGIN = 64999
PV_A, PV_B = 61575, 61576
P_R = "147.28.240.0/24"
P_E = "147.28.241.0/24"


@dataclass
class Scenario:
    name: str
    topology: Topology
    events: list[SimEvent] = field(default_factory=list)
    roas: RoaSet = field(default_factory=RoaSet)
    truth: dict[int, str] = field(default_factory=dict)
    plan: ExperimentPlan | None = None
    horizon: float = 0.0
    description: str = ""

    def to_json(self) -> dict:
        d = self.topology.to_json()
        d.update(
            name=self.name,
            description=self.description,
            events=[e.to_json() for e in self.events],
            roas=[{"prefix": str(v.prefix), "maxlen": v.max_length, "asn": v.asn} for v in self.roas],
            truth={str(a): p for a, p in sorted(self.truth.items())},
            plan=None if self.plan is None else self.plan.to_json(),
            horizon=self.horizon,
        )
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Scenario":
        return cls(
            name=d.get("name", "custom"),
            topology=Topology.from_json(d),
            events=[SimEvent.from_json(e) for e in d.get("events", ())],
            roas=RoaSet(Vrp.make(v["prefix"], v["asn"], v.get("maxlen")) for v in d.get("roas", ())),
            truth={int(a): p for a, p in d.get("truth", {}).items()},
            plan=ExperimentPlan.from_json(d["plan"]) if d.get("plan") else None,
            horizon=float(d.get("horizon", 0.0)),
            description=d.get("description", ""),
        )


def _filter_plan(**kw) -> ExperimentPlan:
    return ExperimentPlan(P_R, P_E, origin=PEERING, alternate_origin=ALT_ORIGIN, **kw)


def steady_state(plan: ExperimentPlan) -> tuple[list[SimEvent], float]:
    """Events leaving the network in the plan's invalid configuration, and a horizon.

    For filter plans the origin's experiment prefix is invalid (C2); for
    prefer-valid plans both origins announce and the first origin is valid.
    ROAs go in first so every node has them before the announcements.
    """
    t = plan.hold
    if plan.pv_origins is not None:
        roas = plan.pv_roas("C1")
        origins = list(plan.pv_origins)
    else:
        roas = plan.filter_roas("C2")
        origins = [plan.origin]
    events = [SimEvent.roa_update(0.0, add=roas)]
    for o in origins:
        events += [SimEvent.announce(t, plan.reference_prefix, o),
                   SimEvent.announce(t, plan.experiment_prefix, o)]
    return events, 2 * t


def _planned(name: str, topo: Topology, truth: dict[int, str], plan: ExperimentPlan,
             description: str) -> Scenario:
    events, horizon = steady_state(plan)
    return Scenario(name, topo, events, truth=truth, plan=plan, horizon=horizon,
                    description=description)


def adjacent_filterer() -> Scenario:
    topo = Topology.build(
        [
            AsNode(PEERING),
            AsNode(8283, rov_policy=RovPolicy.FILTER_INVALID, is_vantage_point=True),
            AsNode(3356),
            AsNode(64601, is_vantage_point=True),
            AsNode(64602, is_vantage_point=True),
        ],
        [
            provider(3356, PEERING),
            peer(8283, PEERING),
            provider(3356, 8283),
            provider(3356, 64601),
            peer(64602, PEERING),
        ],
        seed=1,
    )
    return _planned("adjacent_filterer", topo, {8283: "filter_invalid"}, _filter_plan(),
                    "filtering AS peers with the origin and exports to a collector")


def route_server_filterer() -> Scenario:
    topo = Topology.build(
        [
            AsNode(PEERING),
            AsNode(50300, rov_policy=RovPolicy.FILTER_INVALID,
                   policy_scope=PolicyScope.ROUTE_SERVER_SESSIONS_ONLY, is_vantage_point=True),
            AsNode(6939),
            AsNode(64700, is_vantage_point=True),
        ],
        [
            peer(50300, PEERING, via_route_server=True),
            provider(6939, PEERING),
            provider(6939, 50300),
            provider(50300, 64700),
        ],
        seed=2,
    )
    return _planned("route_server_filterer", topo, {50300: "filter_invalid"}, _filter_plan(),
                    "filters only routes learned from the route server")


def _nonadjacent(second_vp: bool) -> Scenario:
    topo = Topology.build(
        [
            AsNode(PEERING),
            AsNode(3257),
            AsNode(59715, rov_policy=RovPolicy.FILTER_INVALID, is_vantage_point=True),
            AsNode(64801, is_vantage_point=second_vp),
        ],
        [provider(3257, PEERING), provider(3257, 59715), provider(3257, 64801)],
        seed=3,
    )
    name = "nonadjacent_filterer_two_vps" if second_vp else "nonadjacent_filterer"
    return _planned(name, topo, {59715: "filter_invalid"}, _filter_plan(),
                    "filtering AS reached through one transit AS")


def nonadjacent_filterer() -> Scenario:
    return _nonadjacent(False)


def nonadjacent_filterer_two_vps() -> Scenario:
    return _nonadjacent(True)


TE_UPSTREAM_A = 64900  # receives the /24s
TE_UPSTREAM_B = 64901  # receives the /16s
TE_ORIGINS = (65001, 65002, 65003)


def traffic_engineering() -> Scenario:
    """Each origin holds a ROA for its /16 only and sends a /24 to a different upstream."""
    a, b, tier1 = TE_UPSTREAM_A, TE_UPSTREAM_B, 64920
    vps = (64910, 64911, 64912)
    nodes = [AsNode(a), AsNode(b), AsNode(tier1)] + [AsNode(o) for o in TE_ORIGINS]
    nodes += [AsNode(v, is_vantage_point=True) for v in vps]
    links = [provider(tier1, a), provider(tier1, b), provider(tier1, vps[2])]
    links += [provider(a, vps[0]), provider(b, vps[0]), provider(a, vps[1]), provider(b, vps[1])]
    events, vrps = [], []
    for i, o in enumerate(TE_ORIGINS, start=1):
        links += [provider(a, o), provider(b, o)]
        vrps.append(Vrp.make(f"10.{i}.0.0/16", o, 16))
        events.append(SimEvent.announce(0, f"10.{i}.0.0/16", o, sessions=[b]))
        events.append(SimEvent.announce(0, f"10.{i}.1.0/24", o, sessions=[a]))
    topo = Topology.build(nodes, links, seed=4)
    return Scenario("traffic_engineering", topo, events, RoaSet(vrps), truth={}, horizon=1.0,
                    description="invalid /24s diverge from their covering /16 at the first hop")


def _prefer_valid(policy: RovPolicy) -> Scenario:
    decider, below, control = 64950, 64951, 64952
    topo = Topology.build(
        [
            AsNode(PV_A),
            AsNode(PV_B),
            AsNode(decider, rov_policy=policy, is_vantage_point=True),
            AsNode(below, is_vantage_point=True),
            AsNode(control, is_vantage_point=True),
        ],
        [
            provider(decider, PV_A),
            provider(decider, PV_B),
            provider(decider, below),
            provider(control, PV_A),
            provider(control, PV_B),
        ],
        seed=5,
    )
    name = "prefer_valid" if policy is RovPolicy.PREFER_VALID else "prefer_valid_filter"
    plan = ExperimentPlan(P_R, P_E, origin=PV_A, pv_origins=(PV_A, PV_B))
    return _planned(name, topo, {decider: policy.value}, plan,
                    "AS choosing between two origins announcing the same prefixes")


def prefer_valid() -> Scenario:
    return _prefer_valid(RovPolicy.PREFER_VALID)


def prefer_valid_filter() -> Scenario:
    return _prefer_valid(RovPolicy.FILTER_INVALID)


def _revalidation(revalidates: bool) -> Scenario:
    node = 64960
    topo = Topology.build(
        [
            AsNode(PEERING),
            AsNode(node, rov_policy=RovPolicy.FILTER_INVALID, revalidates_on_roa_change=revalidates,
                   is_vantage_point=True),
            AsNode(64961, is_vantage_point=True),
        ],
        [peer(node, PEERING), provider(64961, PEERING), provider(64961, node)],
        seed=6,
    )
    name = "revalidating_filterer" if revalidates else "non_revalidating"
    return _planned(name, topo, {node: "filter_invalid"}, _filter_plan(rounds=2),
                    "filtering AS with or without revalidation on ROA change")


def non_revalidating() -> Scenario:
    return _revalidation(False)


def revalidating_filterer() -> Scenario:
    return _revalidation(True)


CATALOG: dict[str, Callable[[], Scenario]] = {
    "adjacent_filterer": adjacent_filterer,
    "route_server_filterer": route_server_filterer,
    "nonadjacent_filterer": nonadjacent_filterer,
    "nonadjacent_filterer_two_vps": nonadjacent_filterer_two_vps,
    "traffic_engineering": traffic_engineering,
    "prefer_valid": prefer_valid,
    "prefer_valid_filter": prefer_valid_filter,
    "non_revalidating": non_revalidating,
    "revalidating_filterer": revalidating_filterer,
}
ALIASES = {
    "a": "adjacent_filterer",
    "b": "route_server_filterer",
    "c": "nonadjacent_filterer",
    "d": "traffic_engineering",
    "e": "prefer_valid",
    "f": "non_revalidating",
}


def plant_scenario(name: str) -> Scenario:
    key = ALIASES.get(name, name)
    try:
        factory = CATALOG[key]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(CATALOG)}") from None
    return factory()


def load_scenario(path) -> Scenario:
    from .._io import open_text

    with open_text(path) as fh:
        return Scenario.from_json(json.load(fh))
