"""Synthetic app description: screens, widgets, rendering timelines, crash traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

FRAME_WIDTH = 360
FRAME_HEIGHT = 210

Bounds = tuple[int, int, int, int]  # x0, y0, x1, y1; half-open


@dataclass(frozen=True)
class Widget:
    id: str
    bounds: Bounds
    color: tuple[int, int, int]
    kind: str = "button"  # "button" | "image" | "label"

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bounds
        return ((x0 + x1) / 2, (y0 + y1) / 2)

    @property
    def width(self) -> int:
        return self.bounds[2] - self.bounds[0]


@dataclass(frozen=True)
class Screen:
    id: str
    widgets: tuple[Widget, ...]
    background: tuple[int, int, int] = (245, 245, 240)

    def widget(self, widget_id: str) -> Widget:
        for w in self.widgets:
            if w.id == widget_id:
                return w
        raise KeyError(f"screen {self.id!r} has no widget {widget_id!r}")


@dataclass(frozen=True)
class RenderTimeline:
    transition_ms: float = 0.0
    explicit_loading_ms: float = 0.0
    implicit_delays: dict[str, float] = field(default_factory=dict)
    widget_drift: dict[str, Bounds] = field(default_factory=dict)

    def __post_init__(self):
        if self.transition_ms < 0 or self.explicit_loading_ms < 0:
            raise ValueError("durations must be >= 0")
        if any(d < 0 for d in self.implicit_delays.values()):
            raise ValueError("implicit delays must be >= 0")

    @property
    def loading_start(self) -> float:
        return self.transition_ms

    @property
    def implicit_start(self) -> float:
        return self.transition_ms + self.explicit_loading_ms

    @property
    def total_ms(self) -> float:
        return self.implicit_start + max(self.implicit_delays.values(), default=0.0)

    def ready_at(self, widget_id: str) -> float:
        """Elapsed time after which ``widget_id`` is drawn for real and accepts taps."""
        d = self.implicit_delays.get(widget_id, 0.0)
        return self.implicit_start + d if d > 0 else 0.0

    def __hash__(self):
        return hash((self.transition_ms, self.explicit_loading_ms,
                     tuple(sorted(self.implicit_delays.items())), tuple(sorted(self.widget_drift.items()))))


INSTANT = RenderTimeline()


@dataclass(frozen=True)
class Transition:
    target: str
    timeline: RenderTimeline = INSTANT


@dataclass(frozen=True)
class CrashTrace:
    steps: tuple[tuple[str, str], ...]
    expected_crash: bool = True
    name: str = ""


@dataclass
class AppModel:
    name: str
    screens: list[Screen]
    transitions: dict[tuple[str, str], Transition]
    crash_points: set[tuple[str, str]] = field(default_factory=set)
    seed: int = 0
    launch: RenderTimeline = INSTANT
    width: int = FRAME_WIDTH
    height: int = FRAME_HEIGHT

    def __post_init__(self):
        self._by_id = {s.id: s for s in self.screens}
        if len(self._by_id) != len(self.screens):
            raise ValueError(f"{self.name}: duplicate screen ids")
        self.validate()

    @property
    def start(self) -> str:
        return self.screens[0].id

    def screen(self, screen_id: str) -> Screen:
        return self._by_id[screen_id]

    def validate(self) -> None:
        for s in self.screens:
            ids = [w.id for w in s.widgets]
            if len(set(ids)) != len(ids):
                raise ValueError(f"{self.name}: duplicate widget ids on {s.id}")
            for w in s.widgets:
                x0, y0, x1, y1 = w.bounds
                if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
                    raise ValueError(f"{self.name}: widget {s.id}/{w.id} outside the frame")
        for (sid, wid), tr in self.transitions.items():
            self.screen(sid).widget(wid)
            if tr.target not in self._by_id:
                raise ValueError(f"{self.name}: transition to unknown screen {tr.target!r}")
            target = self.screen(tr.target)
            for w in list(tr.timeline.implicit_delays) + list(tr.timeline.widget_drift):
                target.widget(w)
        for sid, wid in self.crash_points:
            self.screen(sid).widget(wid)
        unreachable = set(self._by_id) - self.reachable()
        if unreachable:
            raise ValueError(f"{self.name}: screens unreachable from start: {sorted(unreachable)}")

    def reachable(self) -> set[str]:
        seen, todo = {self.start}, [self.start]
        while todo:
            sid = todo.pop()
            for (src, _), tr in self.transitions.items():
                if src == sid and tr.target not in seen:
                    seen.add(tr.target)
                    todo.append(tr.target)
        return seen

    def check_trace(self, trace: CrashTrace) -> None:
        """Raise if the trace is not a walkable path through the screen graph."""
        screen = self.start
        for i, (sid, wid) in enumerate(trace.steps):
            if sid != screen:
                raise ValueError(f"step {i} expects screen {sid!r} but path is on {screen!r}")
            self.screen(sid).widget(wid)
            if (sid, wid) in self.crash_points:
                if i != len(trace.steps) - 1:
                    raise ValueError(f"step {i} crashes before the trace ends")
                return
            tr = self.transitions.get((sid, wid))
            screen = tr.target if tr else screen


def _tl_to_dict(tl: RenderTimeline) -> dict:
    out = {"transition_ms": tl.transition_ms, "explicit_loading_ms": tl.explicit_loading_ms}
    if tl.implicit_delays:
        out["implicit_delays"] = dict(tl.implicit_delays)
    if tl.widget_drift:
        out["widget_drift"] = {k: list(v) for k, v in tl.widget_drift.items()}
    return out


def _tl_from_dict(d: dict | None) -> RenderTimeline:
    d = d or {}
    return RenderTimeline(
        float(d.get("transition_ms", 0)),
        float(d.get("explicit_loading_ms", 0)),
        {k: float(v) for k, v in (d.get("implicit_delays") or {}).items()},
        {k: tuple(int(c) for c in v) for k, v in (d.get("widget_drift") or {}).items()},
    )


def app_to_dict(app: AppModel, traces: list[CrashTrace] = ()) -> dict:
    return {
        "name": app.name,
        "seed": app.seed,
        "size": [app.width, app.height],
        "launch": _tl_to_dict(app.launch),
        "screens": [
            {
                "id": s.id,
                "background": list(s.background),
                "widgets": [
                    {"id": w.id, "bounds": list(w.bounds), "color": list(w.color), "kind": w.kind}
                    for w in s.widgets
                ],
            }
            for s in app.screens
        ],
        "transitions": [
            {"from": sid, "widget": wid, "to": tr.target, **_tl_to_dict(tr.timeline)}
            for (sid, wid), tr in app.transitions.items()
        ],
        "crash_points": [list(cp) for cp in sorted(app.crash_points)],
        "traces": [
            {"name": t.name, "steps": [list(s) for s in t.steps], "expected_crash": t.expected_crash}
            for t in traces
        ],
    }


def app_from_dict(d: dict) -> tuple[AppModel, list[CrashTrace]]:
    screens = [
        Screen(
            s["id"],
            tuple(Widget(w["id"], tuple(w["bounds"]), tuple(w["color"]), w.get("kind", "button"))
                  for w in s.get("widgets", [])),
            tuple(s.get("background", (245, 245, 240))),
        )
        for s in d["screens"]
    ]
    transitions = {(t["from"], t["widget"]): Transition(t["to"], _tl_from_dict(t)) for t in d.get("transitions", [])}
    width, height = d.get("size", (FRAME_WIDTH, FRAME_HEIGHT))
    app = AppModel(
        d["name"], screens, transitions,
        {tuple(cp) for cp in d.get("crash_points", [])},
        int(d.get("seed", 0)), _tl_from_dict(d.get("launch")), int(width), int(height),
    )
    traces = [
        CrashTrace(tuple(tuple(s) for s in t["steps"]), bool(t.get("expected_crash", True)), t.get("name", ""))
        for t in d.get("traces", [])
    ]
    for t in traces:
        app.check_trace(t)
    return app, traces


def load_app(path: str | Path) -> tuple[AppModel, list[CrashTrace]]:
    return app_from_dict(yaml.safe_load(Path(path).read_text()))


def save_app(app: AppModel, path: str | Path, traces: list[CrashTrace] = ()) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(app_to_dict(app, traces), sort_keys=False))
