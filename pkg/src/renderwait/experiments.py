"""End-to-end experiment runners shared by the scripts and the acceptance suite.

Each runner returns a plain-text ``report`` that depends only on its config,
so two runs with the same seeds can be compared byte for byte. Wall-clock
timings are returned beside the report, never inside it.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .classifier import NetConfig, RenderNet, preprocess, split_by_app, train_arrays
from .evaluation import ConfusionCounts, counts_from, metrics
from .nn.core import sigmoid
from .nn.optim import TrainConfig
from .scheduler import (AdaptivePolicy, FixedPolicy, HarnessConfig, SessionMetrics, TraceResult, exploration_table,
                        run_exploration, run_trace, summarise, trace_table)
from .segmenter import SegmenterConfig, iter_entries
from .sim.corpus import CorpusConfig, iter_screencasts
from .sim.suite import exploration_apps, standard_suite
from .states import Label

FIXED_INTERVALS = (200, 400, 600, 800, 1000)


def default_policies(max_wait_ms: float = 1000.0):
    return [FixedPolicy(ms) for ms in FIXED_INTERVALS] + [AdaptivePolicy(max_wait_ms, "cnn")]


# classifier accuracy ---------------------------------------------------------------

@dataclass
class AccuracyConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    training: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=20, batch_size=16))
    net: NetConfig = field(default_factory=NetConfig)
    split: tuple[int, int, int] = (8, 1, 1)
    split_seed: int = 0


@dataclass
class AccuracyResult:
    report: str
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    model: RenderNet
    n_apps: int
    n_entries: int
    seconds: dict[str, float]


def _tensorise_corpus(cfg: AccuracyConfig):
    """Segment every screencast, keeping only classifier-sized inputs of the sampled frames."""
    entries, xs = [], []
    for e in iter_entries(iter_screencasts(cfg.corpus), cfg.segmenter):
        xs.append(preprocess(e.frame, cfg.net.input_size))
        entries.append(dataclasses.replace(e, frame=None))
    return entries, xs


def run_accuracy(cfg: AccuracyConfig = AccuracyConfig(), progress=None) -> AccuracyResult:
    """Generate apps, label frames with the segmenter, split by app, train and test."""
    clock = {}
    t0 = time.perf_counter()
    entries, xs = _tensorise_corpus(cfg)
    clock["dataset"] = time.perf_counter() - t0
    index = {id(e): i for i, e in enumerate(entries)}
    parts = split_by_app(entries, cfg.split, cfg.split_seed)

    def arrays(part):
        x = np.stack([xs[index[id(e)]] for e in part]) if part else np.zeros((0, 3) + cfg.net.input_size[::-1])
        y = np.array([e.label is Label.FULLY for e in part], dtype=np.float32)
        return x, y

    (xtr, ytr), (xva, yva), (xte, yte) = (arrays(p) for p in parts)
    del xs
    t0 = time.perf_counter()
    result = train_arrays(xtr, ytr, cfg.training, xva, yva, cfg.net, progress)
    clock["train"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    model = result.model
    logits = np.concatenate([model.forward(xte[i:i + 64], training=False) for i in range(0, len(xte), 64)])
    counts = counts_from(yte > 0.5, sigmoid(logits) > 0.5)
    p, r, f1 = metrics(counts)
    clock["test"] = time.perf_counter() - t0

    n_apps = len({e.app_id for e in entries})
    n_full = sum(e.label is Label.FULLY for e in entries)
    lines = [
        f"apps={n_apps} screencasts={cfg.corpus.n_apps * cfg.corpus.casts_per_app} fps={cfg.corpus.fps:g}",
        f"entries={len(entries)} FullyRendered={n_full} PartiallyRendered={len(entries) - n_full}",
        f"split train={len(ytr)} val={len(yva)} test={len(yte)} "
        f"(apps {len({e.app_id for e in parts[0]})}/{len({e.app_id for e in parts[1]})}"
        f"/{len({e.app_id for e in parts[2]})})",
    ]
    lines += [e.line() for e in result.log]
    lines.append(f"best_epoch={result.best_epoch}")
    lines.append(f"test tp={counts.tp} fp={counts.fp} fn={counts.fn} tn={counts.tn}")
    lines.append(f"{'Method':<12} {'Precision':>9} {'Recall':>9} {'F1-score':>9}")
    lines.append(f"{'RenderNet':<12} {p:>9.4f} {r:>9.4f} {f1:>9.4f}")
    return AccuracyResult("\n".join(lines) + "\n", p, r, f1, counts, model, n_apps, len(entries), clock)


# crash-trace replay -------------------------------------------------------------------

@dataclass
class ReplayResult:
    report: str
    results: list[TraceResult]
    seconds: float

    def by_policy(self, name: str) -> list[TraceResult]:
        return [r for r in self.results if r.policy == name]

    def reproduced_fraction(self, name: str) -> float:
        rs = self.by_policy(name)
        return sum(r.reproduced for r in rs) / len(rs)

    def mean_elapsed_ms(self, name: str) -> float:
        return float(np.mean([r.elapsed_ms for r in self.by_policy(name)]))


def run_replay(model: RenderNet | None, policies=None, cfg: HarnessConfig = HarnessConfig()) -> ReplayResult:
    """Replay every standard-suite crash trace under each policy."""
    policies = policies or default_policies()
    t0 = time.perf_counter()
    results = [run_trace(app, trace, p, model, cfg) for app, trace in standard_suite() for p in policies]
    report = "\n".join(r.line() for r in results) + "\n\n" + trace_table(results) + "\n"
    return ReplayResult(report, results, time.perf_counter() - t0)


# timed exploration --------------------------------------------------------------------

@dataclass
class ExplorationResult:
    report: str
    sessions: list[SessionMetrics]
    seconds: float

    def summary(self, name: str):
        return next(s for s in summarise(self.sessions) if s.policy == name)


def run_explorations(model: RenderNet | None, policies=None, n_apps: int = 8, budget_ms: float = 60_000.0,
                     seed: int = 0, cfg: HarnessConfig = HarnessConfig()) -> ExplorationResult:
    """Seeded random exploration of each generated app under each policy."""
    policies = policies or default_policies()
    t0 = time.perf_counter()
    sessions = [run_exploration(app, p, budget_ms, seed, model, cfg)
                for app in exploration_apps(n_apps) for p in policies]
    report = "\n".join(m.line() for m in sessions) + "\n\n" + exploration_table(sessions) + "\n"
    return ExplorationResult(report, sessions, time.perf_counter() - t0)
