"""AS-level BGP simulation with planted ROV policies."""
from .topology import (
    AsNode,
    Link,
    PolicyScope,
    RovPolicy,
    Topology,
    TopologyError,
    ValidityRank,
    peer,
    provider,
)
from .engine import (
    ConvergenceError,
    Route,
    SimEvent,
    Simulator,
    Timeline,
    run,
    snapshot,
    state_snapshot,
    valley_free_violations,
)
from .scenarios import CATALOG, Scenario, load_scenario, plant_scenario
