#!/usr/bin/env python3
"""Walk through the passive three-step inference and how it reacts to missing vantage points.

1. The four-route worked example: which ASes get flagged, which become candidates.
2. A sixty-VP fixture where a single VP holds the only evidence against one AS;
   random 44-VP subsets that miss it call that AS enforcing.
3. Two collectors that disagree: dropping one changes the enforcing set.

Run:  python3 demos/passive_inference.py [--samples 5000] [--seed 0]
"""
import argparse
import logging

from rovmeasure import datasets
from rovmeasure.analysis import sample_vps
from rovmeasure.uncontrolled import infer

log = logging.getLogger("demo")


def worked_example() -> None:
    snap, roas = datasets.worked_example()
    names = {datasets.O: "O", datasets.A: "A", datasets.C: "C", datasets.D: "D", datasets.E: "E"}
    res = infer(snap, roas)
    print("worked example")
    for e, state in snap.validated(roas):
        path = " -> ".join(names[a] for a in reversed(e.path.asns))
        print(f"  {str(e.prefix):<16} {path:<14} {state.value}")
    print("  flagged non-enforcing:", sorted(names[a] for a in res.non_enforcing))
    for asn, origins in sorted(res.candidates.items()):
        print(f"  candidate {names[asn]} for origins {sorted(names[o] for o in origins)}")
    print("  enforcing (>= 3 origins):", sorted(res.enforcing) or "none")


def sampling(samples: int, seed: int) -> None:
    snap, roas, witness = datasets.sixty_vp()
    rep = sample_vps(snap, roas, sample_size=44, samples=samples, seed=seed)
    print("\nsixty vantage points, 44 per sample")
    print(f"  full set: enforcing {sorted(rep.full.enforcing)}, AS{datasets.SIXTY_X} flagged by {witness}")
    print(f"  samples with a false positive: {rep.samples_with_false_positives()} of {samples}")
    for share in (0.25, 0.5):
        print(f"  share of samples with FP ratio >= {share:.0%}: {rep.share_with_fp_ratio_at_least(share):.3f}")


def collectors() -> None:
    snap, roas = datasets.collector_split()
    full = infer(snap, roas)
    wide = infer(datasets.with_collectors(snap, [datasets.WIDE]), roas)
    print("\ncollector subsets")
    print(f"  {datasets.WIDE} only: enforcing {sorted(wide.enforcing)}")
    print(f"  all collectors:        enforcing {sorted(full.enforcing)}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--log-level", default="ERROR")
    args = ap.parse_args()
    logging.basicConfig(level=args.log_level)
    worked_example()
    sampling(args.samples, args.seed)
    collectors()


if __name__ == "__main__":
    main()
