#!/usr/bin/env python3
"""Scenario A end to end: verify the degenerate mesh, run the pipeline,
verify again, and leave both sets of artifacts side by side."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from transtri.cli import load_scenario, run, verify_only  # noqa: E402

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(HERE, "..", "out", "scenario_a"))
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    scenario_path = os.path.join(HERE, "..", "scenarios", "scenario_a.cfg")
    scenario = load_scenario(scenario_path)

    print("== unperturbed mesh (expected to fail: circle through vertices) ==")
    code_before = verify_only(scenario, out_dir=os.path.join(args.out, "before"))
    print(f"verify-only exit status: {code_before}")

    print("== full pipeline ==")
    code_after = run(scenario, seed=args.seed, out_dir=os.path.join(args.out, "after"))
    print(f"run exit status: {code_after}")
    return code_after


if __name__ == "__main__":
    sys.exit(main())
