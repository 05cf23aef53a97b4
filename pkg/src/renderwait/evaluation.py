"""Precision / recall / F1 with FullyRendered as the positive class."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyDataset
from .states import Label


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def counts_from(truth: Sequence[bool], predicted: Sequence[bool]) -> ConfusionCounts:
    t = np.asarray(truth, dtype=bool)
    p = np.asarray(predicted, dtype=bool)
    return ConfusionCounts(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(t & ~p)), int(np.sum(~t & ~p)))


def metrics(c: ConfusionCounts) -> tuple[float, float, float]:
    """(precision, recall, f1); any zero denominator yields 0."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    mean_inference_ms: float
    counts: ConfusionCounts
    verdicts: list = field(default_factory=list, repr=False)

    def table(self, method: str = "RenderNet", with_time: bool = True) -> str:
        head = f"{'Method':<12} {'Precision':>9} {'Recall':>9} {'F1-score':>9}"
        row = f"{method:<12} {self.precision:>9.3f} {self.recall:>9.3f} {self.f1:>9.3f}"
        if with_time:
            head += f" {'Time (ms)':>10}"
            row += f" {self.mean_inference_ms:>10.2f}"
        return f"{head}\n{row}\n"


def evaluate(model, entries, time_each: bool = True) -> EvalReport:
    """Run inference on every entry and aggregate the confusion counts."""
    from .classifier import infer

    entries = list(entries)
    if not entries:
        raise EmptyDataset("nothing to evaluate")
    verdicts = [infer(model, e.frame) for e in entries]
    truth = [e.label is Label.FULLY for e in entries]
    pred = [v.decision is Label.FULLY for v in verdicts]
    c = counts_from(truth, pred)
    p, r, f1 = metrics(c)
    ms = float(np.mean([v.inference_ms for v in verdicts]))
    return EvalReport(p, r, f1, ms, c, verdicts)
