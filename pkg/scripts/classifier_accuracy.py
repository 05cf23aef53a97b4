"""Train the classifier on a generated corpus and report held-out precision/recall/F1.

    python scripts/classifier_accuracy.py --out results/accuracy [--apps 64] [--epochs 20]

Writes ``report.txt`` and ``model.rwnn`` under ``--out``.
"""

import argparse
import dataclasses
import logging
import time
from pathlib import Path

from renderwait.classifier import save_model
from renderwait.experiments import AccuracyConfig, run_accuracy
from renderwait.sim.corpus import CorpusConfig

log = logging.getLogger("accuracy")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/accuracy"))
    ap.add_argument("--apps", type=int, default=CorpusConfig.n_apps)
    ap.add_argument("--casts", type=int, default=CorpusConfig.casts_per_app)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    base = AccuracyConfig()
    cfg = dataclasses.replace(
        base,
        corpus=dataclasses.replace(base.corpus, n_apps=args.apps, casts_per_app=args.casts, seed=args.seed),
        training=dataclasses.replace(base.training, epochs=args.epochs, rng_seed=args.seed),
    )
    t0 = time.perf_counter()
    result = run_accuracy(cfg, progress=lambda e: log.info(e.line()))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.txt").write_text(result.report)
    save_model(result.model, args.out / "model.rwnn")
    print(result.report)
    log.info("dataset %.0fs, train %.0fs, total %.0fs", result.seconds["dataset"], result.seconds["train"],
             time.perf_counter() - t0)


if __name__ == "__main__":
    main()
