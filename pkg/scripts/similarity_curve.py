"""Dump consecutive-frame SSIM scores and segmenter groups for one generated screencast.

Handy for eyeballing where plateaus start and end:

    python scripts/similarity_curve.py --app-seed 1000 --events 4 > curve.csv
"""

import argparse
import csv
import sys

import numpy as np

from renderwait.segmenter import SegmenterConfig, group_scores, pair_scores
from renderwait.sim.device import generate_screencast, random_script
from renderwait.sim.suite import random_app


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--app-seed", type=int, default=1000)
    ap.add_argument("--events", type=int, default=4)
    ap.add_argument("--fps", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    app = random_app(args.app_seed)
    rng = np.random.default_rng(args.seed)
    cast = generate_screencast(app, random_script(app, rng, args.events), args.fps, seed=args.seed)
    scores = pair_scores(cast.frames)
    group_of = {}
    for g in group_scores(scores, SegmenterConfig()):
        for i in range(g.start, g.stop):
            group_of[i] = g
    out = csv.writer(sys.stdout)
    out.writerow(["frame", "t_ms", "ssim_to_next", "group_start", "label", "truth"])
    for i, frame in enumerate(cast.frames):
        g = group_of[i]
        score = f"{scores[i]:.6f}" if i < len(scores) else ""
        out.writerow([i, f"{frame.timestamp_ms:.1f}", score, g.start, g.label.value, cast.truth[i].value])


if __name__ == "__main__":
    main()
