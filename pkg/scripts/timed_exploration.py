"""Timed random exploration of generated apps under fixed and adaptive throttling.

    python scripts/timed_exploration.py --model results/accuracy/model.rwnn --out results/exploration
"""

import argparse
from pathlib import Path

from renderwait.classifier import load_model
from renderwait.experiments import default_policies, run_explorations
from renderwait.scheduler import HarnessConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("results/exploration"))
    ap.add_argument("--apps", type=int, default=8)
    ap.add_argument("--budget-s", type=float, default=60.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    result = run_explorations(load_model(args.model), default_policies(), args.apps, args.budget_s * 1000,
                              args.seed, HarnessConfig())
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.txt").write_text(result.report)
    print(result.report)
    print(f"({result.seconds:.0f}s)")


if __name__ == "__main__":
    main()
