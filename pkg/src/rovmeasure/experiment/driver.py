"""Substrates an experiment can run against.

A driver announces and withdraws prefixes, installs ROAs, lets time pass,
and reports what the vantage points currently see.  :class:`SimDriver`
runs on the simulator; :class:`ReplayDriver` feeds back snapshots that were
recorded elsewhere (e.g. collector dumps taken during a live campaign).
"""
from __future__ import annotations

import logging
from typing import Iterable, Sequence

from ..rib import RibSnapshot
from ..rpki import IpPrefix, RoaSet
from ..sim.engine import SimEvent, Simulator
from ..sim.topology import Topology

log = logging.getLogger(__name__)


class DriverError(RuntimeError):
    """The substrate failed; the current round cannot be trusted."""


class Driver:
    """Interface shared by all drivers."""

    max_roa_delay: float = 0.0

    def announce(self, prefix: IpPrefix, origin: int, sessions: Iterable[int] | None = None) -> None:
        raise NotImplementedError

    def withdraw(self, prefix: IpPrefix, origin: int) -> None:
        raise NotImplementedError

    def set_roas(self, roas: RoaSet) -> None:
        """Replace the VRPs this experiment controls."""
        raise NotImplementedError

    def wait(self, seconds: float) -> None:
        raise NotImplementedError

    def snapshot(self) -> RibSnapshot:
        raise NotImplementedError

    def via_route_server(self, a: int, b: int) -> bool:
        return False


class SimDriver(Driver):
    def __init__(self, topology: Topology, base_roas: RoaSet | None = None) -> None:
        self.topology = topology
        self.base_roas = base_roas or RoaSet()
        self.sim = Simulator(topology, self.base_roas)
        self.managed = RoaSet()
        self.max_roa_delay = topology.max_roa_delay

    @property
    def now(self) -> float:
        return self.sim.now

    def _now(self, ev: SimEvent) -> None:
        self.sim.schedule(ev)
        self.sim.advance_to(self.sim.now)

    def announce(self, prefix, origin, sessions=None):
        self._now(SimEvent.announce(self.sim.now, prefix, origin, sessions))

    def withdraw(self, prefix, origin):
        self._now(SimEvent.withdraw(self.sim.now, prefix, origin))

    def set_roas(self, roas: RoaSet) -> None:
        old = set(self.managed)
        new = set(roas)
        self.managed = roas
        if old != new:
            self._now(SimEvent.roa_update(self.sim.now, add=new - old, remove=old - new))

    def wait(self, seconds: float) -> None:
        self.sim.advance_to(self.sim.now + seconds)

    def snapshot(self) -> RibSnapshot:
        return self.sim.snapshot()

    def via_route_server(self, a: int, b: int) -> bool:
        return self.topology.via_route_server(a, b)


class ReplayDriver(Driver):
    """Returns pre-recorded snapshots in order; control actions are only logged."""

    def __init__(self, snapshots: Sequence[RibSnapshot], route_server_links: Iterable[tuple[int, int]] = ()):
        self._snaps = list(snapshots)
        self._rs = {frozenset(p) for p in route_server_links}
        self.actions: list[tuple] = []

    def announce(self, prefix, origin, sessions=None):
        self.actions.append(("announce", str(prefix), origin))

    def withdraw(self, prefix, origin):
        self.actions.append(("withdraw", str(prefix), origin))

    def set_roas(self, roas):
        self.actions.append(("roas", tuple(str(v) for v in roas)))

    def wait(self, seconds):
        self.actions.append(("wait", seconds))

    def snapshot(self) -> RibSnapshot:
        if not self._snaps:
            raise DriverError("no recorded snapshots left")
        return self._snaps.pop(0)

    def via_route_server(self, a, b):
        return frozenset((a, b)) in self._rs
