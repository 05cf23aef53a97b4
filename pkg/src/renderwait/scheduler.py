"""Event dispatch under a fixed or adaptive throttle, and the replay/exploration harness.

Simulated runs use a virtual clock: frames arrive on a fixed grid of
``1000 / fps`` ms and each classifier call advances the clock by a fixed
``inference_cost_ms``. Wall time spent in real inference is recorded on the
side (``DispatchRecord.inference_ms``) but never feeds back into the run, so
reports are reproducible bit for bit.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .classifier import RenderNet, infer
from .errors import Disconnected, InsufficientFrames, StreamLost
from .imaging import Frame
from .segmenter import SegmenterConfig, pair_scores
from .sim.device import DeviceSession, Outcome
from .sim.model import AppModel, CrashTrace
from .states import Label, Phase

DEFAULT_MAX_WAIT_MS = 1000.0


# policies ---------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPolicy:
    interval_ms: float

    def __post_init__(self):
        if not self.interval_ms > 0:
            raise ValueError("interval_ms must be positive")

    @property
    def name(self) -> str:
        return f"Fixed{self.interval_ms:g}"


@dataclass(frozen=True)
class AdaptivePolicy:
    max_wait_ms: float = DEFAULT_MAX_WAIT_MS
    verdict: str = "cnn"  # "cnn" | "consecutive" | "oracle"

    def __post_init__(self):
        if not self.max_wait_ms > 0:
            raise ValueError("max_wait_ms must be positive")
        if self.verdict not in VERDICT_SOURCES:
            raise ValueError(f"unknown verdict source {self.verdict!r}")

    @property
    def name(self) -> str:
        return {"cnn": "Adaptive", "consecutive": "ConsecutiveFrame", "oracle": "Oracle"}[self.verdict]


ThrottlePolicy = FixedPolicy | AdaptivePolicy
VERDICT_SOURCES = ("cnn", "consecutive", "oracle")


def parse_policy(text: str, max_wait_ms: float = DEFAULT_MAX_WAIT_MS) -> ThrottlePolicy:
    """``fixed:<ms>``, ``adaptive``, ``consecutive`` or ``oracle``."""
    t = text.strip().lower()
    if t.startswith("fixed:"):
        try:
            return FixedPolicy(float(t[6:]))
        except ValueError:
            raise ValueError(f"bad fixed interval in {text!r}") from None
    if t == "adaptive":
        return AdaptivePolicy(max_wait_ms, "cnn")
    if t in ("consecutive", "oracle"):
        return AdaptivePolicy(max_wait_ms, t)
    raise ValueError(f"unknown policy {text!r}; expected fixed:<ms>, adaptive, consecutive or oracle")


# frame sources ----------------------------------------------------------------

@dataclass
class Arrival:
    frame: Frame
    truth: Phase | None = None


class FrameSource(Protocol):
    now: float

    def next_frame(self) -> Arrival: ...

    def advance(self, ms: float) -> None: ...

    def truth_now(self) -> Phase | None: ...


class SimFrameSource:
    """Frames of a device session on a virtual clock, ``t_k = offset + k * period``."""

    def __init__(self, session: DeviceSession, fps: float = 30.0, offset_ms: float = 0.0, now: float = 0.0):
        self.session = session
        self.period = 1000.0 / fps
        self.offset = offset_ms % self.period
        self.now = now

    def _next_tick(self) -> float:
        k = math.floor((self.now - self.offset) / self.period) + 1
        t = self.offset + k * self.period
        return t if t > self.now else t + self.period

    def next_frame(self) -> Arrival:
        self.now = self._next_tick()
        frame, phase = self.session.frame_at(self.now)
        return Arrival(frame, phase)

    def advance(self, ms: float) -> None:
        self.now += ms

    def truth_now(self) -> Phase | None:
        return self.session.phase_at(self.now)


class StreamFrameSource:
    """Adapts a :class:`~renderwait.stream.StreamClient` on the real clock."""

    def __init__(self, client, timeout_s: float = 5.0, session=None):
        self.client = client
        self.timeout_s = timeout_s
        self.session = session
        self._t0 = time.monotonic()

    @property
    def now(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    def next_frame(self) -> Arrival:
        try:
            frame = self.client.next_frame(timeout=self.timeout_s)
        except (Disconnected, TimeoutError) as exc:
            raise StreamLost(str(exc)) from exc
        truth = self.session.phase_at(frame.timestamp_ms) if self.session is not None else None
        return Arrival(frame, truth)

    def advance(self, ms: float) -> None:
        time.sleep(ms / 1000.0)

    def truth_now(self) -> Phase | None:
        return None


# verdicts ------------------------------------------------------------------------

def consecutive_frame_verdict(window, cfg: SegmenterConfig = SegmenterConfig()) -> Label:
    """FullyRendered iff the last ``steady_min_frames`` frames are pairwise steady."""
    frames = list(window)
    k = cfg.steady_min_frames
    if len(frames) < k:
        raise InsufficientFrames(f"need {k} frames, have {len(frames)}")
    scores = pair_scores(frames[-k:], cfg.ssim_scale)
    return Label.FULLY if all(s >= cfg.similarity_threshold for s in scores) else Label.PARTIALLY


class Judge:
    """Turns arriving frames into FullyRendered/PartiallyRendered decisions for one wait."""

    def __init__(self, source: str, model: RenderNet | None = None, seg_cfg: SegmenterConfig = SegmenterConfig()):
        if source == "cnn" and model is None:
            raise ValueError("the cnn verdict source needs a model")
        self.source, self.model, self.seg_cfg = source, model, seg_cfg
        self._window: deque[Frame] = deque(maxlen=seg_cfg.steady_min_frames)

    def reset(self) -> None:
        self._window.clear()

    def __call__(self, arrival: Arrival) -> tuple[Label, float]:
        """Decision and wall-clock milliseconds spent reaching it."""
        start = time.perf_counter()
        if self.source == "oracle":
            if arrival.truth is None:
                raise ValueError("oracle verdicts need ground truth")
            label = arrival.truth.binary
        elif self.source == "consecutive":
            self._window.append(arrival.frame)
            try:
                label = consecutive_frame_verdict(self._window, self.seg_cfg)
            except InsufficientFrames:
                label = Label.PARTIALLY
        else:
            label = infer(self.model, arrival.frame).decision
        return label, (time.perf_counter() - start) * 1000.0


# dispatch ------------------------------------------------------------------------

@dataclass
class DispatchRecord:
    event_id: int
    waited_ms: float
    frames_inspected: int = 0
    forced: bool = False
    state_at_dispatch: Phase | None = None
    inference_ms: float = 0.0  # real wall-clock classifier time, not part of waited_ms in simulation


def wait_for_dispatch(policy: ThrottlePolicy, source: FrameSource, judge: Judge | None = None,
                      event_id: int = 0, inference_cost_ms: float = 0.0) -> DispatchRecord:
    """Block (in ``source`` time) until the next event may be sent."""
    start = source.now
    if isinstance(policy, FixedPolicy):
        source.advance(policy.interval_ms)
        return DispatchRecord(event_id, source.now - start, 0, False, source.truth_now())
    if judge is None:
        raise ValueError("adaptive dispatch needs a judge")
    judge.reset()
    inspected, spent = 0, 0.0
    while True:
        arrival = source.next_frame()
        arrived_after = source.now - start
        label, ms = judge(arrival)
        inspected += 1
        spent += ms
        source.advance(inference_cost_ms)
        if label is Label.FULLY:
            return DispatchRecord(event_id, source.now - start, inspected, False, source.truth_now(), spent)
        if arrived_after >= policy.max_wait_ms:
            return DispatchRecord(event_id, source.now - start, inspected, True, source.truth_now(), spent)


# harness ----------------------------------------------------------------------------

@dataclass
class HarnessConfig:
    fps: float = 30.0
    inference_cost_ms: float = 5.0  # virtual time charged per classifier call
    seed: int = 0
    seg_cfg: SegmenterConfig = field(default_factory=SegmenterConfig)


def _make_judge(policy, model, cfg: HarnessConfig):
    if isinstance(policy, AdaptivePolicy):
        return Judge(policy.verdict, model, cfg.seg_cfg)
    return None


def _cost(policy, cfg: HarnessConfig) -> float:
    return cfg.inference_cost_ms if isinstance(policy, AdaptivePolicy) and policy.verdict == "cnn" else 0.0


@dataclass
class TraceResult:
    app: str
    policy: str
    reproduced: bool
    elapsed_ms: float
    records: list[DispatchRecord]
    failed_step: int | None = None

    def line(self) -> str:
        status = "R" if self.reproduced else "-"
        extra = "" if self.failed_step is None else f" failed_step={self.failed_step}"
        forced = sum(r.forced for r in self.records)
        return (f"app={self.app} policy={self.policy} T={self.elapsed_ms / 1000.0:.3f}s {status} "
                f"events={len(self.records)} forced={forced}{extra}")


def run_trace(app: AppModel, trace: CrashTrace, policy: ThrottlePolicy, model: RenderNet | None = None,
              cfg: HarnessConfig = HarnessConfig()) -> TraceResult:
    """Replay ``trace`` from app launch; each step waits per ``policy`` then taps its widget's final centre."""
    session = DeviceSession(app, launched=False)
    offset = float(np.random.default_rng([cfg.seed, 17]).uniform(0, 1000.0 / cfg.fps))
    source = SimFrameSource(session, cfg.fps, offset)
    judge = _make_judge(policy, model, cfg)
    records = []
    for i, (screen_id, widget_id) in enumerate(trace.steps):
        rec = wait_for_dispatch(policy, source, judge, i, _cost(policy, cfg))
        records.append(rec)
        if session.screen != screen_id:
            return TraceResult(app.name, policy.name, False, source.now, records, i)
        res = session.tap_widget(widget_id, source.now)
        if res.outcome is Outcome.CRASHED:
            ok = i == len(trace.steps) - 1
            return TraceResult(app.name, policy.name, ok, source.now, records, None if ok else i)
        if res.outcome is Outcome.MISSED or res.widget != widget_id:
            return TraceResult(app.name, policy.name, False, source.now, records, i)
    return TraceResult(app.name, policy.name, False, source.now, records, len(trace.steps) - 1)


@dataclass(frozen=True)
class TapRecord:
    t_ms: float
    screen: str
    widget: str
    outcome: Outcome
    target: str | None
    state_at_dispatch: Phase | None
    forced: bool


@dataclass
class SessionMetrics:
    app: str
    policy: str
    events_sent: int = 0
    screens_visited: int = 0
    total_screens: int = 0
    fully_rendered_dispatch_count: int = 0
    crashes_triggered: int = 0
    wall_clock_ms: float = 0.0
    forced_dispatches: int = 0
    taps: list[TapRecord] = field(default_factory=list, repr=False)

    @property
    def fully_rendered_fraction(self) -> float:
        return self.fully_rendered_dispatch_count / self.events_sent if self.events_sent else 0.0

    @property
    def coverage(self) -> float:
        return self.screens_visited / self.total_screens if self.total_screens else 0.0

    def line(self) -> str:
        return (f"app={self.app} policy={self.policy} events={self.events_sent} "
                f"screens={self.screens_visited}/{self.total_screens} crashes={self.crashes_triggered} "
                f"fr={self.fully_rendered_dispatch_count}/{self.events_sent} forced={self.forced_dispatches} "
                f"clock_ms={self.wall_clock_ms:.1f}")


BACK = "<back>"


def run_exploration(app: AppModel, policy: ThrottlePolicy, budget_ms: float, seed: int = 0,
                    model: RenderNet | None = None, cfg: HarnessConfig = HarnessConfig()) -> SessionMetrics:
    """Seeded random exploration until the budget runs out.

    Each event is drawn uniformly from the widgets that accept input at
    dispatch time plus the back key, as a random GUI explorer would. A
    half-rendered screen offers fewer widgets, so back is drawn more often
    and exploration retreats. Taps aim at a widget's final bounds. A crash
    relaunches the app (launch timeline included) and exploration continues.
    """
    metrics = SessionMetrics(app.name, policy.name, total_screens=len(app.screens))
    session = DeviceSession(app, launched=False)
    rng = np.random.default_rng([seed, 31])
    source = SimFrameSource(session, cfg.fps, float(rng.uniform(0, 1000.0 / cfg.fps)))
    judge = _make_judge(policy, model, cfg)
    visited = {app.start}
    while budget_ms > 0:
        rec = wait_for_dispatch(policy, source, judge, metrics.events_sent, _cost(policy, cfg))
        if source.now > budget_ms:
            break
        options = session.interactable(source.now)
        pick = int(rng.integers(len(options) + 1))
        screen = session.screen
        if pick == len(options):
            widget, res = BACK, session.back(source.now)
        else:
            widget = options[pick].id
            res = session.tap_widget(widget, source.now)
        metrics.taps.append(TapRecord(source.now, screen, widget, res.outcome, res.screen,
                                      rec.state_at_dispatch, rec.forced))
        metrics.events_sent += 1
        metrics.forced_dispatches += rec.forced
        metrics.fully_rendered_dispatch_count += rec.state_at_dispatch is Phase.FULLY
        if res.outcome is Outcome.CRASHED:
            metrics.crashes_triggered += 1
            session.restart(source.now)
        elif res.outcome is Outcome.NAVIGATED and res.screen is not None:
            visited.add(res.screen)
    metrics.screens_visited = len(visited)
    metrics.wall_clock_ms = min(source.now, budget_ms) if budget_ms > 0 else 0.0
    return metrics


# reports ----------------------------------------------------------------------------

def trace_table(results: list[TraceResult]) -> str:
    """Apps as rows, policies as columns, each cell ``T R`` (seconds, reproduced flag)."""
    policies = list(dict.fromkeys(r.policy for r in results))
    apps = list(dict.fromkeys(r.app for r in results))
    cell = {(r.app, r.policy): r for r in results}
    width = max(14, max(len(a) for a in apps) + 2)
    head = "App".ljust(width) + "".join(p.rjust(16) for p in policies)
    lines = [head, "-" * len(head)]
    for a in apps:
        row = a.ljust(width)
        for p in policies:
            r = cell.get((a, p))
            row += ("" if r is None else f"{r.elapsed_ms / 1000.0:.2f}s {'R' if r.reproduced else '-'}").rjust(16)
        lines.append(row)
    lines.append("-" * len(head))
    rate = "Reproduced".ljust(width)
    mean = "Mean T (s)".ljust(width)
    for p in policies:
        rs = [r for r in results if r.policy == p]
        rate += f"{sum(r.reproduced for r in rs)}/{len(rs)}".rjust(16)
        mean += f"{np.mean([r.elapsed_ms for r in rs]) / 1000.0:.3f}".rjust(16)
    lines += [rate, mean]
    return "\n".join(lines)


@dataclass
class ExplorationSummary:
    policy: str
    events_sent: int
    screens_visited: int
    total_screens: int
    crashes: int
    fully_rendered: int

    @property
    def coverage(self) -> float:
        return self.screens_visited / self.total_screens if self.total_screens else 0.0

    @property
    def fully_rendered_fraction(self) -> float:
        return self.fully_rendered / self.events_sent if self.events_sent else 0.0


def summarise(metrics: list[SessionMetrics]) -> list[ExplorationSummary]:
    out = []
    for p in dict.fromkeys(m.policy for m in metrics):
        ms = [m for m in metrics if m.policy == p]
        out.append(ExplorationSummary(p, sum(m.events_sent for m in ms), sum(m.screens_visited for m in ms),
                                      sum(m.total_screens for m in ms), sum(m.crashes_triggered for m in ms),
                                      sum(m.fully_rendered_dispatch_count for m in ms)))
    return out


def exploration_table(metrics: list[SessionMetrics]) -> str:
    head = f"{'Policy':<18}{'Coverage':>10}{'# Crashes':>11}{'FR GUI (Total)':>20}{'FR %':>8}"
    lines = [head, "-" * len(head)]
    for s in summarise(metrics):
        fr = f"{s.fully_rendered} ({s.events_sent})"
        lines.append(f"{s.policy:<18}{s.coverage * 100:>9.2f}%{s.crashes:>11}{fr:>20}"
                     f"{s.fully_rendered_fraction * 100:>7.2f}%")
    return "\n".join(lines)
