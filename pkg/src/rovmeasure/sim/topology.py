"""AS-level topology with business relationships and per-AS ROV configuration."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

# local preference by the relationship of the neighbor a route was learned from
CUSTOMER, PEER, PROVIDER = "customer", "peer", "provider"
LOCAL_PREF = {CUSTOMER: 3, PEER: 2, PROVIDER: 1}

DEFAULT_DELAY_RANGE = (600.0, 3600.0)


class TopologyError(ValueError):
    pass


class RovPolicy(str, enum.Enum):
    NONE = "none"
    FILTER_INVALID = "filter_invalid"
    PREFER_VALID = "prefer_valid"


class PolicyScope(str, enum.Enum):
    ALL_SESSIONS = "all_sessions"
    ROUTE_SERVER_SESSIONS_ONLY = "route_server_sessions_only"
    LISTED_SESSIONS = "listed_sessions"


class ValidityRank(str, enum.Enum):
    """Where prefer-valid ranks validity relative to relationship preference."""

    ABOVE_RELATIONSHIP = "above_relationship"
    BELOW_RELATIONSHIP = "below_relationship"


@dataclass(frozen=True)
class AsNode:
    asn: int
    rov_policy: RovPolicy = RovPolicy.NONE
    policy_scope: PolicyScope = PolicyScope.ALL_SESSIONS
    listed_sessions: frozenset[int] = frozenset()
    revalidates_on_roa_change: bool = True
    # seconds; None draws from DEFAULT_DELAY_RANGE using the topology seed
    roa_propagation_delay: float | None = None
    is_vantage_point: bool = False
    prefer_valid_rank: ValidityRank = ValidityRank.ABOVE_RELATIONSHIP

    def __post_init__(self) -> None:
        object.__setattr__(self, "rov_policy", RovPolicy(self.rov_policy))
        object.__setattr__(self, "policy_scope", PolicyScope(self.policy_scope))
        object.__setattr__(self, "prefer_valid_rank", ValidityRank(self.prefer_valid_rank))
        object.__setattr__(self, "listed_sessions", frozenset(self.listed_sessions))
        if self.rov_policy is RovPolicy.NONE and self.policy_scope is not PolicyScope.ALL_SESSIONS:
            raise TopologyError(f"AS{self.asn}: policy scope set without an ROV policy")
        if self.roa_propagation_delay is not None and self.roa_propagation_delay < 0:
            raise TopologyError(f"AS{self.asn}: negative ROA delay")

    @property
    def does_rov(self) -> bool:
        return self.rov_policy is not RovPolicy.NONE

    def to_json(self) -> dict:
        return {
            "asn": self.asn,
            "rov_policy": self.rov_policy.value,
            "policy_scope": self.policy_scope.value,
            "listed_sessions": sorted(self.listed_sessions),
            "revalidates_on_roa_change": self.revalidates_on_roa_change,
            "roa_propagation_delay": self.roa_propagation_delay,
            "is_vantage_point": self.is_vantage_point,
            "prefer_valid_rank": self.prefer_valid_rank.value,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AsNode":
        return cls(
            asn=int(d["asn"]),
            rov_policy=d.get("rov_policy", "none"),
            policy_scope=d.get("policy_scope", "all_sessions"),
            listed_sessions=frozenset(int(a) for a in d.get("listed_sessions", ())),
            revalidates_on_roa_change=bool(d.get("revalidates_on_roa_change", True)),
            roa_propagation_delay=d.get("roa_propagation_delay"),
            is_vantage_point=bool(d.get("is_vantage_point", False)),
            prefer_valid_rank=d.get("prefer_valid_rank", "above_relationship"),
        )


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    relationship: str = "peer"  # "a_provider_of_b" or "peer"
    via_route_server: bool = False

    def __post_init__(self) -> None:
        if self.relationship not in ("a_provider_of_b", "peer"):
            raise TopologyError(f"unknown link relationship {self.relationship!r}")
        if self.a == self.b:
            raise TopologyError(f"self link on AS{self.a}")

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "relationship": self.relationship,
            "via_route_server": self.via_route_server,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Link":
        return cls(int(d["a"]), int(d["b"]), d.get("relationship", "peer"),
                   bool(d.get("via_route_server", False)))


def provider(a: int, b: int, **kw) -> Link:
    """``a`` is the provider of ``b``."""
    return Link(a, b, "a_provider_of_b", **kw)


def peer(a: int, b: int, **kw) -> Link:
    return Link(a, b, "peer", **kw)


@dataclass
class Topology:
    nodes: dict[int, AsNode]
    links: list[Link]
    seed: int = 0
    collector: str = "sim"
    # neighbor -> relationship of that neighbor as seen from the key AS
    neighbors: dict[int, dict[int, str]] = field(init=False, repr=False)
    route_server: dict[int, dict[int, bool]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.neighbors = {asn: {} for asn in self.nodes}
        self.route_server = {asn: {} for asn in self.nodes}
        seen: set[frozenset[int]] = set()
        for link in self.links:
            for end in (link.a, link.b):
                if end not in self.nodes:
                    raise TopologyError(f"link endpoint AS{end} is not a node")
            pair = frozenset((link.a, link.b))
            if pair in seen:
                raise TopologyError(f"more than one link between AS{link.a} and AS{link.b}")
            seen.add(pair)
            if link.relationship == "peer":
                self.neighbors[link.a][link.b] = PEER
                self.neighbors[link.b][link.a] = PEER
            else:
                self.neighbors[link.a][link.b] = CUSTOMER
                self.neighbors[link.b][link.a] = PROVIDER
            self.route_server[link.a][link.b] = link.via_route_server
            self.route_server[link.b][link.a] = link.via_route_server
        self._check_provider_cycles()
        self._delays = {asn: self._resolve_delay(n) for asn, n in self.nodes.items()}

    @classmethod
    def build(cls, nodes: Iterable[AsNode | int], links: Iterable[Link], **kw) -> "Topology":
        nd = {}
        for n in nodes:
            node = n if isinstance(n, AsNode) else AsNode(int(n))
            nd[node.asn] = node
        return cls(nd, list(links), **kw)

    def _check_provider_cycles(self) -> None:
        # Kahn's algorithm over customer->provider edges
        indeg = {a: 0 for a in self.nodes}
        for a, nbrs in self.neighbors.items():
            for b, rel in nbrs.items():
                if rel == PROVIDER:
                    indeg[b] += 1
        queue = deque(sorted(a for a, d in indeg.items() if d == 0))
        done = 0
        while queue:
            a = queue.popleft()
            done += 1
            for b, rel in self.neighbors[a].items():
                if rel == PROVIDER:
                    indeg[b] -= 1
                    if indeg[b] == 0:
                        queue.append(b)
        if done != len(self.nodes):
            stuck = min(a for a, d in indeg.items() if d > 0)
            raise TopologyError(f"customer-provider cycle through AS{stuck}")

    def _resolve_delay(self, node: AsNode) -> float:
        if node.roa_propagation_delay is not None:
            return float(node.roa_propagation_delay)
        rng = np.random.default_rng([self.seed, node.asn])
        lo, hi = DEFAULT_DELAY_RANGE
        return float(round(rng.uniform(lo, hi)))

    def roa_delay(self, asn: int) -> float:
        return self._delays[asn]

    @property
    def max_roa_delay(self) -> float:
        return max(self._delays.values(), default=0.0)

    def relationship(self, a: int, b: int) -> str | None:
        """How ``a`` sees ``b``: customer, peer, provider, or None if not adjacent."""
        return self.neighbors[a].get(b)

    def via_route_server(self, a: int, b: int) -> bool:
        return self.route_server[a].get(b, False)

    @property
    def vantage_points(self) -> list[int]:
        return sorted(a for a, n in self.nodes.items() if n.is_vantage_point)

    def reachable_from(self, origin: int) -> set[int]:
        seen = {origin}
        queue = deque([origin])
        while queue:
            a = queue.popleft()
            for b in self.neighbors[a]:
                if b not in seen:
                    seen.add(b)
                    queue.append(b)
        return seen

    def is_connected_from(self, origin: int) -> bool:
        return len(self.reachable_from(origin)) == len(self.nodes)

    def with_node(self, node: AsNode) -> "Topology":
        nodes = dict(self.nodes)
        nodes[node.asn] = node
        return Topology(nodes, list(self.links), self.seed, self.collector)

    def with_changes(self, asn: int, **changes) -> "Topology":
        return self.with_node(replace(self.nodes[asn], **changes))

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "collector": self.collector,
            "nodes": [self.nodes[a].to_json() for a in sorted(self.nodes)],
            "links": [l.to_json() for l in self.links],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Topology":
        nodes = [AsNode.from_json(n) for n in d["nodes"]]
        return cls(
            {n.asn: n for n in nodes},
            [Link.from_json(l) for l in d.get("links", ())],
            seed=int(d.get("seed", 0)),
            collector=str(d.get("collector", "sim")),
        )
