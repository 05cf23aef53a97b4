"""Batches of screencasts recorded from random apps, for building training data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..screencast import Screencast
from .device import generate_screencast, random_script
from .suite import random_app


@dataclass(frozen=True)
class CorpusConfig:
    n_apps: int = 64
    casts_per_app: int = 2
    events_per_cast: int = 10
    fps: float = 10.0
    seed: int = 0
    # apps are drawn from seeds base_app_seed .. base_app_seed + n_apps - 1
    base_app_seed: int = 1000
    dwell_ms: tuple[float, float] = (600.0, 1200.0)


def iter_screencasts(cfg: CorpusConfig = CorpusConfig()) -> Iterator[Screencast]:
    """Yield screencasts one at a time so a large corpus never sits in memory at once."""
    for a in range(cfg.n_apps):
        app = random_app(cfg.base_app_seed + a)
        for c in range(cfg.casts_per_app):
            rng = np.random.default_rng([cfg.seed, a, c])
            script = random_script(app, rng, cfg.events_per_cast, cfg.dwell_ms)
            cast_seed = int(rng.integers(2**31))
            yield generate_screencast(app, script, cfg.fps, seed=cast_seed, cast_id=f"{app.name}-c{c}")
