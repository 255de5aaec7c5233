#!/usr/bin/env python3
"""Scenario B (3d line through a vertex) plus the degenerate variant.

The shipped scenario uses a generic direction and completes; the
degenerate variant aims the line along an axis so that it contains whole
edge chains, which only verify-only can sensibly look at (the pipeline
rejects every shift candidate for an edge contained in the line and
aborts; pass --try-degenerate-run to watch that happen)."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from transtri.cli import load_scenario, run, verify_only  # noqa: E402

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(HERE, "..", "out", "scenario_b"))
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--try-degenerate-run", action="store_true")
    args = ap.parse_args()

    scen_dir = os.path.join(HERE, "..", "scenarios")
    scenario = load_scenario(os.path.join(scen_dir, "scenario_b.cfg"))
    degenerate = load_scenario(os.path.join(scen_dir, "scenario_b_degenerate.cfg"))

    print("== degenerate variant, unperturbed (line along edge chains) ==")
    verify_only(degenerate, out_dir=os.path.join(args.out, "degenerate_before"))

    if args.try_degenerate_run:
        print("== degenerate variant, pipeline (expected to abort) ==")
        code = run(degenerate, out_dir=os.path.join(args.out, "degenerate_after"))
        print(f"degenerate run exit status: {code}")

    print("== shipped scenario, full pipeline ==")
    code = run(scenario, seed=args.seed, out_dir=os.path.join(args.out, "after"))
    print(f"run exit status: {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
