"""``rovmeasure`` command line.

Every subcommand writes its report atomically and drops a run manifest next
to it (``<out>.manifest.json``).  The report embeds ``manifest_id``, a hash
of everything that determines its content: tool version, subcommand,
effective flags and input digests.  Thread count, output paths and wall-clock
times are recorded in the manifest but excluded from the id.

Exit status: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from ._io import atomic_write, file_digest, open_text, resolve_input
from .analysis import SCHEMA_VERSION, coverage, divergence, prefix_visibility, sample_vps
from .rib import AsRelationships, RelationshipConflict, RibParseError, VantagePoint, load_relationships, load_snapshot
from .rpki import IpPrefix, RoaSet, parse_asn, validate_with_witness
from .sim.engine import ConvergenceError, run, snapshot as take_snapshot
from .sim.scenarios import CATALOG, ALIASES, Scenario, load_scenario, plant_scenario
from .sim.topology import TopologyError
from .uncontrolled import infer

log = logging.getLogger("rovmeasure")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# flags that never influence report content
_VOLATILE = {"threads", "out", "out_snapshots", "log_level", "func", "command"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are 1 here
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunManifest:
    tool_version: str
    subcommand: str
    flags: dict[str, Any]
    input_digests: dict[str, str]
    seeds: dict[str, int | None]
    started: float = 0.0
    finished: float = 0.0
    outputs: list[str] = field(default_factory=list)

    @property
    def manifest_id(self) -> str:
        # an input's path is not content; its digest is
        stable = {
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
            "flags": {k: v for k, v in self.flags.items()
                      if k not in _VOLATILE and k not in self.input_digests},
            "input_digests": self.input_digests,
            "seeds": self.seeds,
        }
        blob = json.dumps(stable, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:20]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "manifest_id": self.manifest_id,
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
            "flags": self.flags,
            "input_digests": self.input_digests,
            "seeds": self.seeds,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
        }


# --- helpers ------------------------------------------------------------------

_INPUT_FLAGS = ("rib", "vrps", "rels", "vps", "plan", "scenario")


def _manifest(args: argparse.Namespace) -> RunManifest:
    flags: dict[str, Any] = {}
    digests: dict[str, str] = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "command"):
            continue
        if k in _INPUT_FLAGS and v is not None and resolve_input(v).is_file():
            digests[k] = file_digest(v)
        flags[k] = v
    return RunManifest(__version__, args.command, flags, digests, {"seed": getattr(args, "seed", None)})


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(path: str | Path, text: str) -> None:
    with atomic_write(path) as fh:
        fh.write(text)


def _write_manifest(m: RunManifest, path: str | Path) -> None:
    _write(path, _dump_json(m.to_json()))


def _csv_with_id(text: str, manifest_id: str) -> str:
    lines = text.splitlines(keepends=True)
    if not lines:
        return text
    out = [lines[0].rstrip("\n") + ",manifest_id\n"]
    out += [ln.rstrip("\n") + f",{manifest_id}\n" for ln in lines[1:]]
    return "".join(out)


def _load_roas(path: str) -> RoaSet:
    with open_text(path) as fh:
        return RoaSet.from_csv(fh)


def _load_rels(path: str | None) -> AsRelationships | None:
    return None if path is None else load_relationships(path)


def _parse_vps(spec: str | None, available: Sequence[VantagePoint]) -> list[VantagePoint] | None:
    """``--vps`` takes a file (one selector per line) or a comma list.

    A selector is a full ``collector:ASn:peer_id`` name, or an AS number
    (with or without "AS"), which selects every session of that AS.
    """
    if spec is None:
        return None
    p = resolve_input(spec)
    if p.is_file():
        with open_text(p) as fh:
            items = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    else:
        items = [s.strip() for s in spec.split(",") if s.strip()]
    by_name = {str(vp): vp for vp in available}
    chosen: set[VantagePoint] = set()
    for item in items:
        if item in by_name:
            chosen.add(by_name[item])
            continue
        try:
            asn = parse_asn(item)
        except ValueError:
            raise DataError(f"unknown vantage point selector {item!r}") from None
        hits = [vp for vp in available if vp.peer_asn == asn]
        if not hits:
            raise DataError(f"no vantage point for AS{asn} in the snapshot")
        chosen.update(hits)
    return sorted(chosen)


def _scenario(spec: str) -> Scenario:
    p = resolve_input(spec)
    if p.is_file():
        return load_scenario(p)
    try:
        return plant_scenario(spec)
    except KeyError as exc:
        raise DataError(str(exc.args[0])) from None


def _with_seed(sc: Scenario, seed: int | None) -> Scenario:
    if seed is None:
        return sc
    return replace(sc, topology=replace(sc.topology, seed=seed))


# --- subcommands --------------------------------------------------------------


def cmd_validate(args, m: RunManifest) -> Any:
    roas = _load_roas(args.vrps)
    if args.rib:
        snap = load_snapshot(args.rib, args.max_malformed)
        routes = [(str(e.vp), e.prefix, e.origin) for e in snap]
    else:
        if args.prefix is None or args.origin is None:
            raise UsageError("validate needs --rib, or both --prefix and --origin")
        routes = [(None, IpPrefix.parse(args.prefix), parse_asn(args.origin))]
    results = []
    for vp, prefix, origin in routes:
        state, witness = validate_with_witness(origin, prefix, roas)
        row = {"prefix": str(prefix), "origin": origin, "state": state.value,
               "witness": None if witness is None else str(witness)}
        if vp is not None:
            row["vp"] = vp
        results.append(row)
    return {"results": results}


def cmd_infer(args, m: RunManifest) -> Any:
    snap = load_snapshot(args.rib, args.max_malformed)
    roas = _load_roas(args.vrps)
    rels = _load_rels(args.rels)
    if args.raw_paths:
        log.info("--raw-paths: path comparison is by AS membership, so prepending cannot change results")
    vps = _parse_vps(args.vps, snap.vantage_points)
    if vps is not None:
        snap = snap.restrict(vps)
    res = infer(snap, roas, rels, args.threshold, args.transitive_customers, args.threads)
    out = res.to_json()
    out["vantage_points"] = [str(v) for v in snap.vantage_points]
    if snap.stats is not None:
        out["parse"] = snap.stats.to_json()
    return out


def cmd_sample(args, m: RunManifest) -> Any:
    snap = load_snapshot(args.rib, args.max_malformed)
    rep = sample_vps(snap, _load_roas(args.vrps), _load_rels(args.rels), args.n, args.k,
                     args.seed, args.threshold, args.transitive_customers, args.threads)
    log.info("%d of %d samples contain false positives", rep.samples_with_false_positives(), args.k)
    return rep.to_csv()


def cmd_visibility(args, m):
    snap = load_snapshot(args.rib, args.max_malformed)
    rep = prefix_visibility(snap, _load_roas(args.vrps), args.min_origins)
    log.info("%.1f%% of vantage points see fewer than %d invalid origins",
             100 * rep.share_below_min_origins, args.min_origins)
    return rep.to_csv()


def cmd_coverage(args, m):
    snap = load_snapshot(args.rib, args.max_malformed)
    return coverage(snap, _load_roas(args.vrps)).to_csv()


def cmd_divergence(args, m):
    snap = load_snapshot(args.rib, args.max_malformed)
    return divergence(snap, _load_roas(args.vrps)).histogram_csv()


def cmd_simulate(args, m: RunManifest) -> Any:
    sc = _with_seed(_scenario(args.scenario), args.seed)
    times = sorted(set(args.at)) if args.at else [sc.horizon]
    horizon = max([sc.horizon, *times])
    timeline = run(sc.topology, sc.events, horizon, sc.roas)
    out_dir = Path(args.out_snapshots)
    written = []
    for t in times:
        snap = take_snapshot(timeline, t)
        name = out_dir / f"snapshot_t{int(t)}.jsonl"
        with atomic_write(name) as fh:
            snap.write_jsonl(fh)
        written.append(str(name))
    vrps = out_dir / "vrps.csv"
    with atomic_write(vrps) as fh:
        sc.roas.with_changes(add=_final_roas(sc)).to_csv(fh)
    scen = sc.to_json()
    scen["manifest_id"] = m.manifest_id
    scen["schema_version"] = SCHEMA_VERSION
    _write(out_dir / "scenario.json", _dump_json(scen))
    m.outputs = written + [str(vrps), str(out_dir / "scenario.json")]
    return None


def _final_roas(sc: Scenario):
    """VRPs in force once every ROA event of the scenario has been applied."""
    vrps = set()
    for ev in sc.events:
        if ev.kind == "roa_update":
            vrps |= set(ev.add)
            vrps -= set(ev.remove)
    return vrps


def cmd_experiment(args, m: RunManifest) -> Any:
    from .experiment import ExperimentPlan, SimDriver, run_filter_experiment, run_prefer_valid_experiment

    sc = _with_seed(_scenario(args.scenario), args.seed)
    if args.plan:
        with open_text(args.plan) as fh:
            plan = ExperimentPlan.from_json(json.load(fh))
    elif sc.plan is not None:
        plan = sc.plan
    else:
        raise DataError("no --plan given and the scenario carries none")
    variant = args.variant
    if variant is None:
        variant = "prefer_valid" if plan.alternate_origin is None and plan.pv_origins else "base"
    driver = SimDriver(sc.topology, sc.roas)
    if variant == "prefer_valid":
        result = run_prefer_valid_experiment(driver, plan)
    else:
        result = run_filter_experiment(driver, plan, variant=variant)
    out = result.to_json()
    out["scenario"] = sc.name
    out["truth"] = {str(a): p for a, p in sorted(sc.truth.items())}
    return out


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="PRNG seed (sampling; simulator ROA delays)")
    common.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    rib = _Parser(add_help=False)
    rib.add_argument("--rib", required=True, help="canonical JSONL RIB snapshot (gzip ok)")
    rib.add_argument("--vrps", required=True, help="VRP CSV with prefix,maxlen,asn")
    rib.add_argument("--max-malformed", type=float, default=0.10,
                     help="fail when more than this share of lines is malformed")

    p = _Parser(prog="rovmeasure", description="Measure RPKI route-origin-validation adoption.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    s = sub.add_parser("validate", parents=[common], help="RFC 6811 origin validation")
    s.add_argument("--vrps", required=True)
    s.add_argument("--rib")
    s.add_argument("--prefix")
    s.add_argument("--origin")
    s.add_argument("--max-malformed", type=float, default=0.10)
    s.add_argument("--out", help="JSON report (stdout when omitted)")
    s.set_defaults(func=cmd_validate, fmt="json")

    s = sub.add_parser("infer", parents=[common, rib], help="passive three-step ROV inference")
    s.add_argument("--rels", help="CAIDA a|b|rel relationships")
    s.add_argument("--threshold", type=int, default=3)
    s.add_argument("--vps", help="restrict to these VPs: comma list or file")
    s.add_argument("--transitive-customers", action="store_true",
                   help="exempt the whole customer cone, not just direct customers")
    s.add_argument("--raw-paths", action="store_true",
                   help="accepted for compatibility; membership comparison ignores prepending")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_infer, fmt="json")

    s = sub.add_parser("sample", parents=[common, rib], help="VP-subset false-positive analysis")
    s.add_argument("--rels")
    s.add_argument("--n", type=int, default=44, help="vantage points per sample")
    s.add_argument("--k", type=int, default=5000, help="number of samples")
    s.add_argument("--threshold", type=int, default=3)
    s.add_argument("--transitive-customers", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample, fmt="csv", seed=0)

    s = sub.add_parser("visibility", parents=[common, rib], help="per-VP prefix visibility")
    s.add_argument("--min-origins", type=int, default=3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_visibility, fmt="csv")

    for name, fn, helptext in (("coverage", cmd_coverage, "invalid prefixes under a covering route"),
                               ("divergence", cmd_divergence, "where invalid and covering paths split")):
        s = sub.add_parser(name, parents=[common, rib], help=helptext)
        s.add_argument("--out", required=True)
        s.set_defaults(func=fn, fmt="csv")

    s = sub.add_parser("simulate", parents=[common], help="run a scenario and export snapshots")
    s.add_argument("--scenario", required=True,
                   help=f"scenario JSON file or one of: {', '.join(sorted(CATALOG))} "
                        f"(aliases {', '.join(sorted(ALIASES))})")
    s.add_argument("--at", type=float, action="append", help="snapshot time(s); default the horizon")
    s.add_argument("--out-snapshots", required=True)
    s.set_defaults(func=cmd_simulate, fmt="dir")

    s = sub.add_parser("experiment", parents=[common], help="controlled experiment on a driver")
    s.add_argument("--plan", help="plan JSON; defaults to the scenario's plan")
    s.add_argument("--driver", choices=["sim"], default="sim")
    s.add_argument("--scenario", required=True)
    s.add_argument("--variant", choices=["base", "withdraw_reannounce", "prefer_valid"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_experiment, fmt="json")
    return p


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        m = _manifest(args)
        m.started = time.time()
        payload = args.func(args, m)
        m.finished = time.time()
        out = getattr(args, "out", None)
        if args.fmt == "json":
            payload = dict(payload, schema_version=SCHEMA_VERSION, manifest_id=m.manifest_id)
            text = _dump_json(payload)
        elif args.fmt == "csv":
            text = _csv_with_id(payload, m.manifest_id)
        else:
            text = None
        if args.fmt == "dir":
            _write_manifest(m, Path(args.out_snapshots) / "manifest.json")
        elif out is None:
            sys.stdout.write(text)
        else:
            m.outputs = [str(out)]
            _write(out, text)
            _write_manifest(m, f"{out}.manifest.json")
    except UsageError as exc:
        print(f"rovmeasure {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, RibParseError, RelationshipConflict, TopologyError, ConvergenceError,
            ValueError, KeyError, OSError) as exc:
        print(f"rovmeasure {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())
