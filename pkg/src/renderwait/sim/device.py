"""A simulated device: renders an app over time and accepts taps.

Rendering after a navigation runs through up to three phases, measured from
the tap that caused it:

* ``[0, transition_ms)`` cross-fade from the old screen, drifting widgets
  interpolated from their start bounds (Transiting);
* ``[transition_ms, + explicit_loading_ms)`` dimmed screen under a spinner
  (ExplicitLoading, nothing is tappable);
* then widgets with a pending implicit delay show as shimmering gray
  placeholders until their delay expires (ImplicitLoading).

Navigations push the screen they leave onto a back stack; the system back
key pops it with a short cross-fade and no loading.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InvalidScript
from ..imaging import Frame
from ..screencast import Screencast
from ..states import Phase
from . import raster
from .model import INSTANT, AppModel, Bounds, RenderTimeline, Widget

BACK_TIMELINE = RenderTimeline(150.0)


class Outcome(str, Enum):
    NAVIGATED = "Navigated"
    CRASHED = "Crashed"
    MISSED = "Missed"


@dataclass(frozen=True)
class TapResult:
    outcome: Outcome
    screen: str | None = None  # target screen for NAVIGATED
    widget: str | None = None  # widget that received the tap


def _lerp_bounds(start: Bounds, end: Bounds, p: float) -> Bounds:
    return tuple(s + p * (e - s) for s, e in zip(start, end))


class DeviceSession:
    """Mutable device state: which screen is shown and how far its rendering got."""

    def __init__(self, app: AppModel, t0: float = 0.0, launched: bool = True):
        self.app = app
        self.screen = app.start
        self.prev: str | None = None
        self.event_t = t0
        # a freshly constructed session starts fully rendered unless asked to launch
        self.timeline: RenderTimeline = INSTANT if launched else app.launch
        self.crashed = False
        self.visited = {app.start}
        self.back_stack: list[str] = []
        self._final_cache: dict[str, np.ndarray] = {}

    # rendering ---------------------------------------------------------

    def _final(self, screen_id: str | None) -> np.ndarray:
        if screen_id is None:
            return raster.black(self.app.width, self.app.height)
        if screen_id not in self._final_cache:
            canvas = raster.render_screen(self.app.screen(screen_id), self.app.width, self.app.height)
            self._final_cache[screen_id] = canvas
        return self._final_cache[screen_id]

    def phase_at(self, t: float) -> Phase:
        tl = self.timeline
        e = t - self.event_t
        if e >= tl.total_ms:
            return Phase.FULLY
        if e < tl.transition_ms:
            return Phase.TRANSITING
        if e < tl.implicit_start:
            return Phase.EXPLICIT_LOADING
        return Phase.IMPLICIT_LOADING

    def _bounds_at(self, widget: Widget, e: float) -> Bounds:
        tl = self.timeline
        start = tl.widget_drift.get(widget.id)
        if start is None or e >= tl.transition_ms:
            return widget.bounds
        return _lerp_bounds(start, widget.bounds, max(0.0, e) / tl.transition_ms)

    def frame_at(self, t: float) -> tuple[Frame, Phase]:
        phase = self.phase_at(t)
        if phase is Phase.FULLY:
            return Frame(raster.to_uint8(self._final(self.screen)), t), phase
        tl = self.timeline
        e = t - self.event_t
        canvas = raster.render_screen(
            self.app.screen(self.screen), self.app.width, self.app.height,
            elapsed_ms=e, ready_at=tl.ready_at, bounds_of=lambda w: self._bounds_at(w, e),
        )
        if phase is Phase.TRANSITING:
            p = e / tl.transition_ms
            alpha = raster.CROSSFADE_START + (1.0 - raster.CROSSFADE_START) * p
            canvas = (1.0 - alpha) * self._final(self.prev) + alpha * canvas
        elif phase is Phase.EXPLICIT_LOADING:
            raster.draw_spinner(canvas, e - tl.transition_ms)
        return Frame(raster.to_uint8(canvas), t), phase

    # input ---------------------------------------------------------------

    def interactable(self, t: float) -> list[Widget]:
        """Widgets that accept input at ``t``: none under a spinner, and no placeholders."""
        if self.phase_at(t) is Phase.EXPLICIT_LOADING:
            return []
        tl = self.timeline
        e = t - self.event_t
        return [w for w in self.app.screen(self.screen).widgets if e >= tl.total_ms or e >= tl.ready_at(w.id)]

    def hit_test(self, x: float, y: float, t: float) -> Widget | None:
        """Topmost tappable widget under ``(x, y)`` as rendered at time ``t``."""
        e = t - self.event_t
        for w in reversed(self.interactable(t)):
            x0, y0, x1, y1 = self._bounds_at(w, e)
            if x0 <= x < x1 and y0 <= y < y1:
                return w
        return None

    def navigate(self, target: str, timeline: RenderTimeline, t: float) -> None:
        if target != self.screen:
            self.back_stack.append(self.screen)
        self._show(target, timeline, t)

    def _show(self, target: str, timeline: RenderTimeline, t: float) -> None:
        self.prev, self.screen = self.screen, target
        self.event_t = t
        self.timeline = timeline
        self.visited.add(target)

    def back(self, t: float) -> TapResult:
        """The system back key: return to the previous screen, or do nothing at the root."""
        if self.crashed or not self.back_stack:
            return TapResult(Outcome.MISSED)
        target = self.back_stack.pop()
        self._show(target, BACK_TIMELINE, t)
        return TapResult(Outcome.NAVIGATED, target)

    def tap(self, x: float, y: float, t: float) -> TapResult:
        if not (0 <= x < self.app.width and 0 <= y < self.app.height):
            raise ValueError(f"tap ({x}, {y}) outside the {self.app.width}x{self.app.height} frame")
        if self.crashed:
            return TapResult(Outcome.MISSED)
        w = self.hit_test(x, y, t)
        if w is None:
            return TapResult(Outcome.MISSED)
        key = (self.screen, w.id)
        if key in self.app.crash_points:
            self.crashed = True
            return TapResult(Outcome.CRASHED, widget=w.id)
        tr = self.app.transitions.get(key)
        if tr is None:
            return TapResult(Outcome.NAVIGATED, self.screen, w.id)
        self.navigate(tr.target, tr.timeline, t)
        return TapResult(Outcome.NAVIGATED, tr.target, w.id)

    def tap_widget(self, widget_id: str, t: float) -> TapResult:
        """Tap the centre of a widget's final bounds on the current screen."""
        x, y = self.app.screen(self.screen).widget(widget_id).center
        return self.tap(x, y, t)

    def restart(self, t: float) -> None:
        """Relaunch after a crash: back to the start screen via the launch timeline."""
        self.crashed = False
        self.back_stack.clear()
        self.prev, self.screen = None, self.app.start
        self.event_t = t
        self.timeline = self.app.launch


def frame_at(session: DeviceSession, t: float) -> tuple[Frame, Phase]:
    return session.frame_at(t)


def tap(session: DeviceSession, point: tuple[float, float], t: float) -> TapResult:
    return session.tap(point[0], point[1], t)


@dataclass(frozen=True)
class ScriptEvent:
    t_ms: float
    widget: str


def random_script(app: AppModel, rng: np.random.Generator, n_events: int,
                  dwell_ms: tuple[float, float] = (300.0, 900.0)) -> list[ScriptEvent]:
    """A random walk that lets every rendering finish and dwell before the next tap."""
    screen, t, events = app.start, float(rng.uniform(*dwell_ms)), []
    for _ in range(n_events):
        widgets = app.screen(screen).widgets
        choices = [w.id for w in widgets if (screen, w.id) in app.transitions] or [w.id for w in widgets]
        wid = choices[int(rng.integers(len(choices)))]
        events.append(ScriptEvent(t, wid))
        if (screen, wid) in app.crash_points:
            break
        tr = app.transitions.get((screen, wid))
        render = tr.timeline.total_ms if tr else 0.0
        screen = tr.target if tr else screen
        t += render + float(rng.uniform(*dwell_ms))
    return events


def generate_screencast(app: AppModel, script: list[ScriptEvent], fps: float, seed: int | None = None,
                        tail_ms: float = 1000.0, cast_id: str | None = None) -> Screencast:
    """Record the app at ``fps`` while replaying ``script``; labels are the simulator's ground truth.

    Recording ends ``tail_ms`` after the last event's rendering completes.
    ``seed`` offsets the capture clock by a random fraction of a frame period.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    period = 1000.0 / fps
    offset = 0.0 if seed is None else float(np.random.default_rng(seed).uniform(0, period))
    session = DeviceSession(app)
    frames, truth = [], []
    pending = sorted(script, key=lambda ev: ev.t_ms)
    k = 0
    while True:
        t = offset + k * 1000.0 / fps
        # stop once the last event's rendering has been steady for tail_ms
        if not pending and t > session.event_t + session.timeline.total_ms + tail_ms:
            break
        while pending and pending[0].t_ms <= t:
            ev = pending.pop(0)
            try:
                session.app.screen(session.screen).widget(ev.widget)
            except KeyError as exc:
                raise InvalidScript(f"at {ev.t_ms} ms: {exc.args[0]}") from None
            res = session.tap_widget(ev.widget, ev.t_ms)
            if res.outcome is Outcome.CRASHED:
                session.restart(ev.t_ms)
        frame, phase = session.frame_at(t)
        frames.append(frame)
        truth.append(phase)
        k += 1
    return Screencast(cast_id or f"{app.name}-s{seed or 0}", frames, app_id=app.name, fps=fps, truth=truth)
