"""Steady-state grouping of screencast frames and balanced dataset sampling.

Consecutive frames are compared with SSIM on luma. Frames are cut into
maximal runs in which every neighbouring pair is similar; long runs are
fully rendered GUIs, everything else (animations, loading, short pauses
between two drops) is partially rendered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyInput, ScreencastError, TooFewFrames
from .imaging import Frame, rgb_to_luminance, ssim
from .screencast import Screencast
from .states import Label


@dataclass(frozen=True)
class SegmenterConfig:
    similarity_threshold: float = 0.99
    steady_min_frames: int = 5
    partial_sample_count: int = 3
    rng_seed: int = 0
    ssim_scale: int = 1

    def __post_init__(self):
        if not 0 < self.similarity_threshold <= 1:
            raise ValueError("similarity_threshold must be in (0, 1]")
        if self.steady_min_frames < 2:
            raise ValueError("steady_min_frames must be >= 2")
        if self.partial_sample_count < 1:
            raise ValueError("partial_sample_count must be >= 1")
        if self.ssim_scale < 1:
            raise ValueError("ssim_scale must be >= 1")


@dataclass(frozen=True)
class StateGroup:
    start: int  # inclusive
    stop: int  # exclusive
    label: Label

    @property
    def frame_indices(self) -> range:
        return range(self.start, self.stop)

    def __len__(self):
        return self.stop - self.start


@dataclass(frozen=True)
class DatasetEntry:
    screencast_id: str
    frame_index: int
    label: Label
    group_id: int
    app_id: str = ""
    frame: Frame | None = field(default=None, compare=False, repr=False)


@dataclass
class LabeledDataset:
    entries: list[DatasetEntry] = field(default_factory=list)
    sources: dict[str, str] = field(default_factory=dict)  # screencast id -> directory

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def counts(self) -> dict[Label, int]:
        out = {Label.FULLY: 0, Label.PARTIALLY: 0}
        for e in self.entries:
            out[e.label] += 1
        return out

    def manifest(self) -> str:
        lines = ["# dataset v1", "# screencast_id\tframe_index\tlabel\tgroup_id\tapp_id"]
        for cid, path in sorted(self.sources.items()):
            lines.append(f"source\t{cid}\t{path}")
        for e in self.entries:
            lines.append(f"{e.screencast_id}\t{e.frame_index}\t{e.label}\t{e.group_id}\t{e.app_id}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.manifest())

    @classmethod
    def load(cls, path: str | Path, load_frames: bool = True) -> "LabeledDataset":
        from .screencast import read_frames

        path = Path(path)
        ds = cls()
        for raw in path.read_text().splitlines():
            if not raw or raw.startswith("#"):
                continue
            cols = raw.split("\t")
            if cols[0] == "source":
                src = Path(cols[2])
                ds.sources[cols[1]] = str(src if src.is_absolute() else path.parent / src)
                continue
            app = cols[4] if len(cols) > 4 else ""
            ds.entries.append(DatasetEntry(cols[0], int(cols[1]), Label(cols[2]), int(cols[3]), app))
        if load_frames and ds.sources:
            wanted: dict[str, set[int]] = {}
            for e in ds.entries:
                wanted.setdefault(e.screencast_id, set()).add(e.frame_index)
            frames = {cid: read_frames(ds.sources[cid], idx) for cid, idx in wanted.items()}
            ds.entries = [
                DatasetEntry(e.screencast_id, e.frame_index, e.label, e.group_id, e.app_id,
                             frames[e.screencast_id][e.frame_index])
                for e in ds.entries
            ]
        return ds


def pair_scores(screencast: Sequence[Frame], scale: int = 1) -> list[float]:
    """SSIM of every consecutive pair; ``N`` scores for ``N + 1`` frames."""
    if len(screencast) < 2:
        raise TooFewFrames(f"need at least 2 frames, got {len(screencast)}")
    lumas = [rgb_to_luminance(f) for f in screencast]
    out = []
    for a, b in zip(lumas, lumas[1:]):
        # identical maps score exactly 1.0 under the formula; skip the filtering
        same = a.luma.shape == b.luma.shape and np.array_equal(a.luma, b.luma)
        out.append(1.0 if same else ssim(a, b, scale))
    return out


def group_scores(scores: Sequence[float], cfg: SegmenterConfig) -> list[StateGroup]:
    """Group ``len(scores) + 1`` frames given their consecutive-pair scores."""
    groups = []
    start = 0
    n_frames = len(scores) + 1
    for i, s in enumerate(scores):
        if s < cfg.similarity_threshold:
            groups.append(_make_group(start, i + 1, cfg))
            start = i + 1
    groups.append(_make_group(start, n_frames, cfg))
    return groups


def _make_group(start, stop, cfg):
    label = Label.FULLY if stop - start >= cfg.steady_min_frames else Label.PARTIALLY
    return StateGroup(start, stop, label)


def segment(screencast: Sequence[Frame], cfg: SegmenterConfig = SegmenterConfig()) -> list[StateGroup]:
    if len(screencast) == 0:
        raise TooFewFrames("empty screencast")
    if len(screencast) == 1:
        return [_make_group(0, 1, cfg)]
    return group_scores(pair_scores(screencast, cfg.ssim_scale), cfg)


def uniform_indices(n: int, k: int) -> list[int]:
    """``k`` evenly spaced positions in ``range(n)``, endpoints included for k >= 2."""
    k = min(k, n)
    if k == 1:
        return [int(math.floor((n - 1) / 2 + 0.5))]
    return [int(math.floor(j * (n - 1) / (k - 1) + 0.5)) for j in range(k)]


def sample(groups: Sequence[StateGroup], cfg: SegmenterConfig, rng: np.random.Generator | None = None) -> list[tuple[int, int]]:
    """Pick ``(frame_index, group_id)`` pairs: one random frame per fully
    rendered group, evenly spaced frames from each partial group."""
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    picks = []
    for gid, g in enumerate(groups):
        if g.label is Label.FULLY:
            picks.append((g.start + int(rng.integers(len(g))), gid))
        else:
            picks.extend((g.start + off, gid) for off in uniform_indices(len(g), cfg.partial_sample_count))
    return picks


def segment_screencast(cast: Screencast, cfg: SegmenterConfig, rng: np.random.Generator) -> list[DatasetEntry]:
    """Segment one screencast (minus scroll intervals) into dataset entries."""
    entries = []
    group_base = 0
    for lo, hi in cast.kept_spans():
        groups = segment(cast.frames[lo:hi], cfg)
        for idx, gid in sample(groups, cfg, rng):
            i = lo + idx
            entries.append(DatasetEntry(cast.id, i, groups[gid].label, group_base + gid, cast.app_id, cast.frames[i]))
        group_base += len(groups)
    return entries


def iter_entries(screencasts: Iterable[Screencast], cfg: SegmenterConfig = SegmenterConfig()) -> Iterator[DatasetEntry]:
    """Entries of each screencast in turn; the sampling stream of cast ``n`` is seeded by ``(rng_seed, n)``."""
    n = -1
    for n, cast in enumerate(screencasts):
        rng = np.random.default_rng([cfg.rng_seed, n])
        try:
            entries = segment_screencast(cast, cfg, rng)
        except Exception as exc:
            raise ScreencastError(cast.id, exc) from exc
        yield from entries
    if n < 0:
        raise EmptyInput("no screencasts given")


def build_dataset(screencasts: Iterable[Screencast], cfg: SegmenterConfig = SegmenterConfig()) -> LabeledDataset:
    """Segment and sample every screencast.

    ``screencasts`` may be a lazy iterator; only sampled frames are retained.
    """
    return LabeledDataset(list(iter_entries(screencasts, cfg)))
