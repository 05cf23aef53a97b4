"""Replay the standard crash-trace suite under fixed and adaptive throttling.

    python scripts/crash_replay.py --model results/accuracy/model.rwnn --out results/replay
"""

import argparse
from pathlib import Path

from renderwait.classifier import load_model
from renderwait.experiments import default_policies, run_replay
from renderwait.scheduler import HarnessConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("results/replay"))
    ap.add_argument("--max-wait-ms", type=float, default=1000.0)
    ap.add_argument("--fps", type=float, default=30.0)
    args = ap.parse_args()

    result = run_replay(load_model(args.model), default_policies(args.max_wait_ms), HarnessConfig(fps=args.fps))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.txt").write_text(result.report)
    print(result.report)
    print(f"({result.seconds:.0f}s)")


if __name__ == "__main__":
    main()
