"""Experiment plans and per-vantage-point observation records."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..rib import VantagePoint
from ..rpki import IpPrefix, RoaSet, Vrp, as_prefix, covers

HOUR = 3600.0

O1 = "O1_same_route"
O2 = "O2_different_route"
O3 = "O3_no_route"
INELIGIBLE = "ineligible"

NO_REFERENCE = "no_route_to_reference"
DIFFERING_IN_C1 = "differing_routes_in_C1"


@dataclass(frozen=True)
class ExperimentPlan:
    """Announcement and ROA schedule for one experiment campaign.

    ``origin`` announces both prefixes; in configuration C2 the ROA for the
    experiment prefix names ``alternate_origin`` instead, making the origin's
    announcement invalid.  ``pv_origins`` are the two announcing ASes of the
    prefer-valid experiment.
    """

    reference_prefix: IpPrefix
    experiment_prefix: IpPrefix
    origin: int = 47065
    alternate_origin: int | None = None
    pv_origins: tuple[int, int] | None = None
    hold: float = 8 * HOUR
    rounds: int = 3
    schedule: tuple[str, ...] = ("C1", "C2")
    pv_schedule: tuple[str, ...] = ("C1", "C2", "C1")
    reannounce_after: float | None = None
    block_length: int = 16

    def __post_init__(self) -> None:
        object.__setattr__(self, "reference_prefix", as_prefix(self.reference_prefix))
        object.__setattr__(self, "experiment_prefix", as_prefix(self.experiment_prefix))
        object.__setattr__(self, "schedule", tuple(self.schedule))
        object.__setattr__(self, "pv_schedule", tuple(self.pv_schedule))
        if self.pv_origins is not None:
            object.__setattr__(self, "pv_origins", tuple(self.pv_origins))
        self.validate()

    def validate(self) -> None:
        pr, pe = self.reference_prefix, self.experiment_prefix
        if pr == pe:
            raise ValueError("reference and experiment prefixes must differ")
        if pr.version != pe.version:
            raise ValueError("reference and experiment prefixes must share an address family")
        n = self.block_length
        if n > min(pr.length, pe.length) or not covers(pr.supernet(n), pe):
            raise ValueError(f"{pr} and {pe} are not drawn from one /{n} block")
        if self.hold <= 0:
            raise ValueError("hold must be positive")
        if self.rounds < 1:
            raise ValueError("at least one round is required")
        for cfg in self.schedule + self.pv_schedule:
            if cfg not in ("C1", "C2"):
                raise ValueError(f"unknown configuration {cfg!r}")
        if self.pv_origins is not None and len(set(self.pv_origins)) != 2:
            raise ValueError("prefer-valid needs two distinct origins")

    @property
    def reannounce_delay(self) -> float:
        return self.hold if self.reannounce_after is None else self.reannounce_after

    def check_driver(self, max_roa_delay: float) -> None:
        if self.hold < max_roa_delay:
            raise ValueError(
                f"hold of {self.hold:.0f}s is shorter than the maximum ROA delay {max_roa_delay:.0f}s"
            )

    def filter_roas(self, config: str) -> RoaSet:
        if self.alternate_origin is None:
            raise ValueError("filter experiments need an alternate_origin")
        exp_owner = self.origin if config == "C1" else self.alternate_origin
        return RoaSet([
            Vrp.make(self.reference_prefix, self.origin),
            Vrp.make(self.experiment_prefix, exp_owner),
        ])

    def pv_roas(self, config: str | None) -> RoaSet:
        """ROAs for the prefer-valid experiment; ``None`` makes every P_E route invalid."""
        if self.pv_origins is None:
            raise ValueError("prefer-valid experiments need pv_origins")
        a, b = self.pv_origins
        vrps = [Vrp.make(self.reference_prefix, a), Vrp.make(self.reference_prefix, b)]
        if config is None:
            vrps.append(Vrp.make(self.experiment_prefix, 0))
        else:
            vrps.append(Vrp.make(self.experiment_prefix, a if config == "C1" else b))
        return RoaSet(vrps)

    def pv_valid_origin(self, config: str) -> int:
        assert self.pv_origins is not None
        return self.pv_origins[0] if config == "C1" else self.pv_origins[1]

    def to_json(self) -> dict:
        return {
            "reference_prefix": str(self.reference_prefix),
            "experiment_prefix": str(self.experiment_prefix),
            "origin": self.origin,
            "alternate_origin": self.alternate_origin,
            "pv_origins": list(self.pv_origins) if self.pv_origins else None,
            "hold": self.hold,
            "rounds": self.rounds,
            "schedule": list(self.schedule),
            "pv_schedule": list(self.pv_schedule),
            "reannounce_after": self.reannounce_after,
            "block_length": self.block_length,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentPlan":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown plan fields: {sorted(unknown)}")
        kw = dict(d)
        if kw.get("pv_origins") is not None:
            kw["pv_origins"] = tuple(kw["pv_origins"])
        return cls(**kw)


@dataclass(frozen=True)
class Observation:
    """Outcome at one vantage point for one round.

    Paths are as exported by the vantage point (its own ASN excluded).
    ``c1_path`` is the experiment-prefix route while it was valid and
    ``c2_path`` the route after it became invalid.
    """

    vp: VantagePoint
    round: int
    config_id: str
    cls: str
    reason: str | None = None
    reference_path: tuple[int, ...] | None = None
    c1_path: tuple[int, ...] | None = None
    c2_path: tuple[int, ...] | None = None

    @property
    def eligible(self) -> bool:
        return self.cls != INELIGIBLE

    @property
    def supports_filtering(self) -> bool:
        return self.cls in (O2, O3)

    def to_json(self) -> dict:
        return {
            "vp": str(self.vp),
            "vp_asn": self.vp.peer_asn,
            "round": self.round,
            "config": self.config_id,
            "class": self.cls,
            "reason": self.reason,
            "reference_path": _pl(self.reference_path),
            "c1_path": _pl(self.c1_path),
            "c2_path": _pl(self.c2_path),
        }


def _pl(p):
    return None if p is None else list(p)


@dataclass
class RoundRecord:
    round: int
    status: str  # completed | voided
    reason: str | None = None

    def to_json(self) -> dict:
        return {"round": self.round, "status": self.status, "reason": self.reason}


@dataclass
class Verdict:
    asn: int
    policy: str  # filter_invalid | prefer_valid
    sessions: list[int] = field(default_factory=list)
    route_server_only: bool | None = None
    strength: str | None = None
    consistency: float = 1.0
    evidence: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "asn": self.asn,
            "policy": self.policy,
            "sessions": self.sessions,
            "route_server_only": self.route_server_only,
            "strength": self.strength,
            "consistency": self.consistency,
            "evidence": self.evidence,
        }


@dataclass
class CandidateSet:
    """ASes that may have changed the decision seen at ``vp``; one of them did."""

    vp: VantagePoint
    candidates: frozenset[int]
    policy: str
    support: int
    consistency: float
    consistent: bool
    definite: bool = False

    def to_json(self) -> dict:
        return {
            "vp": str(self.vp),
            "candidates": sorted(self.candidates),
            "policy": self.policy,
            "support": self.support,
            "consistency": self.consistency,
            "consistent": self.consistent,
            "definite": self.definite,
        }


@dataclass
class PolicyInference:
    verdicts: dict[int, Verdict] = field(default_factory=dict)
    candidate_sets: list[CandidateSet] = field(default_factory=list)
    no_rov_observed: set[int] = field(default_factory=set)
    consistency: dict[VantagePoint, float] = field(default_factory=dict)

    def verdict(self, asn: int) -> str:
        v = self.verdicts.get(asn)
        return v.policy if v else "no_rov_observed"

    def filtering(self) -> set[int]:
        return {a for a, v in self.verdicts.items() if v.policy == "filter_invalid"}

    def preferring(self) -> set[int]:
        return {a for a, v in self.verdicts.items() if v.policy == "prefer_valid"}

    def to_json(self) -> dict:
        return {
            "verdicts": [self.verdicts[a].to_json() for a in sorted(self.verdicts)],
            "candidate_sets": [c.to_json() for c in self.candidate_sets],
            "no_rov_observed": sorted(self.no_rov_observed),
            "consistency": {str(vp): r for vp, r in sorted(self.consistency.items())},
        }
