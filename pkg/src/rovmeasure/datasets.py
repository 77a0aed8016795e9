"""Small hand-built RIB fixtures with known inference outcomes.

Each builder returns ``(snapshot, roas)``.  Invalid routes are made invalid
by a VRP for exactly that prefix naming :data:`NOBODY`; non-invalid routes
are NotFound unless stated otherwise.
"""
from __future__ import annotations

import io
import ipaddress
from typing import Iterable, Sequence

from .rib import AsPath, RibEntry, RibSnapshot, VantagePoint
from .rpki import IpPrefix, RoaSet, Vrp

NOBODY = 64999


class FixtureBuilder:
    """Hands out fresh /24s and records routes plus the VRPs that make them invalid."""

    def __init__(self, block: str = "100.64.0.0/10", ts: int = 1_475_000_000) -> None:
        self._subnets = ipaddress.ip_network(block).subnets(new_prefix=24)
        self.entries: list[RibEntry] = []
        self.vrps: list[Vrp] = []
        self.ts = ts

    def fresh(self) -> IpPrefix:
        return IpPrefix.parse(str(next(self._subnets)))

    def route(self, vp: VantagePoint, path: Sequence[int], prefix: IpPrefix | str | None = None) -> IpPrefix:
        p = self.fresh() if prefix is None else IpPrefix.parse(str(prefix))
        self.entries.append(RibEntry(vp, p, AsPath.of(path), self.ts))
        return p

    def invalid(self, vp: VantagePoint, path: Sequence[int]) -> IpPrefix:
        p = self.route(vp, path)
        self.vrps.append(Vrp.make(p, NOBODY))
        return p

    def roa(self, vrp: Vrp) -> None:
        self.vrps.append(vrp)

    def build(self) -> tuple[RibSnapshot, RoaSet]:
        return RibSnapshot(self.entries), RoaSet(self.vrps)


# --- four-path worked example ------------------------------------------------

V, O, A, C, D, E = 65000, 65001, 65002, 65003, 65004, 65005
WORKED_VP = VantagePoint("example", V, "1")


def worked_example() -> tuple[RibSnapshot, RoaSet]:
    """One vantage point, one origin, four routes.

    ==  ==============  =============  ========
    P1  192.0.2.0/24    O -> A -> C    NotFound
    P2  10.1.0.0/16     O -> A -> E    Valid
    P3  10.1.1.0/24     O -> A -> D    Invalid
    P4  10.1.2.0/24     O -> A -> D    Invalid
    ==  ==============  =============  ========
    """
    b = FixtureBuilder()
    b.route(WORKED_VP, [C, A, O], "192.0.2.0/24")
    b.route(WORKED_VP, [E, A, O], "10.1.0.0/16")
    b.route(WORKED_VP, [D, A, O], "10.1.1.0/24")
    b.route(WORKED_VP, [D, A, O], "10.1.2.0/24")
    b.roa(Vrp.make("10.1.0.0/16", O, 16))
    return b.build()


def worked_example_jsonl() -> str:
    snap, _ = worked_example()
    return "".join(e.to_json() + "\n" for e in snap)


def worked_example_vrps_csv() -> str:
    _, roas = worked_example()
    buf = io.StringIO()
    roas.to_csv(buf)
    return buf.getvalue()


# --- sixty vantage points, one of which holds the only counter-evidence -------

SIXTY_TRANSIT = 64500
SIXTY_X = 64510  # looks enforcing unless the witness VP is sampled
SIXTY_Z = 64520  # never on an invalid path: enforcing everywhere
SIXTY_ORIGINS = (65101, 65102, 65103)
SIXTY_OTHER_ORIGIN = 65110


def sixty_vp(n_vps: int = 60, witness_index: int | None = None) -> tuple[RibSnapshot, RoaSet, VantagePoint]:
    """Every VP sees X and Z avoid invalid routes from three origins; one VP sees X carry one.

    Returns the snapshot, ROAs and the witness VP.
    """
    if n_vps < 2:
        raise ValueError("need at least two vantage points")
    witness_index = n_vps - 1 if witness_index is None else witness_index
    b = FixtureBuilder()
    vps = [VantagePoint("synthetic", 64600 + i, str(i)) for i in range(n_vps)]
    for vp in vps:
        for o in SIXTY_ORIGINS:
            b.route(vp, [SIXTY_TRANSIT, SIXTY_X, o])
            b.route(vp, [SIXTY_TRANSIT, SIXTY_Z, o])
            b.invalid(vp, [SIXTY_TRANSIT, o])
    witness = vps[witness_index]
    b.invalid(witness, [SIXTY_X, SIXTY_OTHER_ORIGIN])
    snap, roas = b.build()
    return snap, roas, witness


# --- two collectors that disagree --------------------------------------------

WIDE = "routeviews-wide"
RV4 = "route-views4"
SPLIT_ENFORCING_AT_WIDE = (48237, 262150, 3786)
SPLIT_FLAGGED_AT_RV4 = (48237, 3786)
SPLIT_8100 = 8100
SPLIT_8100_ORIGINS_WIDE = (46562,)
SPLIT_8100_ORIGINS_RV4 = (6921, 46261)
_WIDE_ORIGINS = (65201, 65202, 65203)
_T_WIDE, _T_RV4, _Q = 64601, 64602, 65210


def collector_split() -> tuple[RibSnapshot, RoaSet]:
    """A four-VP collector whose view alone yields three enforcing ASes.

    A second collector shows two of them on invalid paths, and supplies the
    remaining origins that make AS8100 enforcing on the combined data.
    """
    b = FixtureBuilder()
    wide = [VantagePoint(WIDE, 64701 + i, str(i)) for i in range(4)]
    rv4 = [VantagePoint(RV4, 64711 + i, str(i)) for i in range(2)]
    for i, asn in enumerate(SPLIT_ENFORCING_AT_WIDE):
        vp = wide[i]
        for o in _WIDE_ORIGINS:
            b.route(vp, [_T_WIDE, asn, o])
            b.invalid(vp, [_T_WIDE, o])
    for o in SPLIT_8100_ORIGINS_WIDE:
        b.route(wide[3], [_T_WIDE, SPLIT_8100, o])
        b.invalid(wide[3], [_T_WIDE, o])
    b.invalid(rv4[0], [_T_RV4, *SPLIT_FLAGGED_AT_RV4, _Q])
    for o in SPLIT_8100_ORIGINS_RV4:
        b.route(rv4[1], [_T_RV4, SPLIT_8100, o])
        b.invalid(rv4[1], [_T_RV4, o])
    return b.build()


def with_collectors(snap: RibSnapshot, collectors: Iterable[str]) -> RibSnapshot:
    keep = set(collectors)
    return snap.restrict(vp for vp in snap.vantage_points if vp.collector in keep)
