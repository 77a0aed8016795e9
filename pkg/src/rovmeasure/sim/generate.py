"""Seeded random AS topologies with a valley-free-friendly hierarchy."""
from __future__ import annotations

import numpy as np

from .topology import AsNode, Link, RovPolicy, Topology, peer, provider


def random_topology(
    seed: int,
    n_nodes: int,
    origin: int = 47065,
    tier1: int = 3,
    vp_fraction: float = 0.4,
    peer_prob: float = 0.08,
    first_asn: int = 64512,
) -> Topology:
    """Build a hierarchy: a tier-1 clique, then ASes that buy transit from earlier ones.

    ASes are created in order; each non-tier-1 AS picks one or two providers
    among the ASes created before it, so the provider graph is acyclic.
    Extra peerings join unrelated pairs with probability ``peer_prob``.
    ``origin`` is the last AS created, so it is a stub.
    """
    if n_nodes < tier1 + 1:
        raise ValueError("topology too small for its tier-1 clique")
    rng = np.random.default_rng(seed)
    asns = [first_asn + i for i in range(n_nodes - 1)] + [origin]
    links: dict[frozenset[int], Link] = {}
    for i in range(tier1):
        for j in range(i + 1, tier1):
            links[frozenset((asns[i], asns[j]))] = peer(asns[i], asns[j])
    for k in range(tier1, n_nodes):
        n_prov = 1 if k < tier1 + 2 else int(rng.integers(1, 3))
        chosen = rng.choice(k, size=min(n_prov, k), replace=False)
        for j in sorted(int(c) for c in chosen):
            links[frozenset((asns[j], asns[k]))] = provider(asns[j], asns[k])
    for i in range(tier1, n_nodes):
        for j in range(i + 1, n_nodes):
            pair = frozenset((asns[i], asns[j]))
            if pair not in links and rng.random() < peer_prob:
                links[pair] = peer(asns[i], asns[j])
    vps = rng.random(n_nodes) < vp_fraction
    nodes = [AsNode(a, is_vantage_point=bool(v) and a != origin) for a, v in zip(asns, vps)]
    return Topology.build(nodes, list(links.values()), seed=seed)


def plant_filters(topo: Topology, asns, as_vantage_points: bool = False) -> Topology:
    """Return a copy where ``asns`` run filter_invalid on every session."""
    for a in asns:
        topo = topo.with_changes(a, rov_policy=RovPolicy.FILTER_INVALID,
                                 **({"is_vantage_point": True} if as_vantage_points else {}))
    return topo
