"""Synthetic app generators.

``random_app`` produces varied apps for dataset generation and exploration
runs. ``standard_suite`` is a fixed set of crash-trace apps whose rendering
times span 100-900 ms, plus one app whose loading outlasts the 1000 ms
adaptive cap.
"""

from __future__ import annotations

import colorsys

import numpy as np

from .model import (FRAME_HEIGHT, FRAME_WIDTH, AppModel, CrashTrace, RenderTimeline, Screen, Transition,
                    Widget)

TITLE_H = 26
CONTENT_TOP = 34
MARGIN = 10


def _rgb(h, s, v):
    return tuple(int(round(c * 255)) for c in colorsys.hsv_to_rgb(h % 1.0, s, v))


def _widget_color(rng):
    return _rgb(rng.uniform(), rng.uniform(0.6, 1.0), rng.uniform(0.55, 0.95))


def _background(rng):
    if rng.uniform() < 0.2:
        return _rgb(rng.uniform(), rng.uniform(0.1, 0.3), rng.uniform(0.12, 0.22))
    return _rgb(rng.uniform(), rng.uniform(0.03, 0.12), rng.uniform(0.93, 1.0))


def _grid_layout(rng, n_cells_min=3, width=FRAME_WIDTH, height=FRAME_HEIGHT):
    rows = int(rng.integers(2, 4))
    cols = int(rng.integers(2, 4))
    cw = (width - 2 * MARGIN) / cols
    ch = (height - CONTENT_TOP - MARGIN) / rows
    cells = []
    for r in range(rows):
        for c in range(cols):
            fw, fh = rng.uniform(0.6, 0.9), rng.uniform(0.55, 0.85)
            w, h = max(40, int(cw * fw)), max(22, int(ch * fh))
            x0 = int(MARGIN + c * cw + rng.uniform(0, cw - w))
            y0 = int(CONTENT_TOP + r * ch + rng.uniform(0, ch - h))
            cells.append((x0, y0, x0 + w, y0 + h))
    keep = rng.permutation(len(cells))[: max(n_cells_min, int(len(cells) * rng.uniform(0.6, 1.0)))]
    return [cells[i] for i in sorted(keep)]


def _drift_start(bounds, rng, width=FRAME_WIDTH, factor=None):
    x0, y0, x1, y1 = bounds
    w = x1 - x0
    shift = int(round(w * (factor if factor is not None else rng.uniform(1.0, 1.5))))
    room_right = width - x1
    dx = shift if room_right >= x0 else -shift
    return (x0 + dx, y0, x1 + dx, y1)


def _title(rng, accent):
    return Widget("title", (0, 0, FRAME_WIDTH, TITLE_H), accent, "label")


def random_timeline(rng, target: Screen, max_total=1800.0) -> RenderTimeline:
    t = 0.0 if rng.uniform() < 0.15 else float(rng.uniform(100, 450))
    explicit = 0.0 if rng.uniform() < 0.55 else float(rng.uniform(200, 600))
    implicit = {}
    for w in target.widgets:
        if w.kind == "image" and rng.uniform() < 0.5:
            implicit[w.id] = float(rng.uniform(100, 400))
    drift = {}
    if t >= 150 and rng.uniform() < 0.35:
        movable = [w for w in target.widgets if w.kind != "label"]
        for i in rng.permutation(len(movable))[: int(rng.integers(1, 4))]:
            drift[movable[i].id] = _drift_start(movable[i].bounds, rng)
    tl = RenderTimeline(round(t), round(explicit), {k: round(v) for k, v in implicit.items()}, drift)
    if tl.total_ms > max_total:
        tl = RenderTimeline(tl.transition_ms, 0.0, tl.implicit_delays, drift)
    return tl


def _random_screens(rng, n_screens: int) -> list[Screen]:
    screens = []
    for s in range(n_screens):
        accent = _widget_color(rng)
        widgets = [_title(rng, accent)]
        for i, b in enumerate(_grid_layout(rng)):
            kind = "image" if rng.uniform() < 0.3 else "button"
            widgets.append(Widget(f"w{i}", b, _widget_color(rng), kind))
        screens.append(Screen(f"s{s}", tuple(widgets), _background(rng)))
    return screens


def random_app(seed: int, n_screens: int | None = None, crash_points: int = 1, name: str | None = None) -> AppModel:
    """A random app whose screen graph is connected from its start screen."""
    rng = np.random.default_rng([seed, 7919])
    n_screens = n_screens or int(rng.integers(5, 10))
    screens = _random_screens(rng, n_screens)
    transitions, chain = {}, set()
    for s, screen in enumerate(screens):
        tappable = [w for w in screen.widgets if w.kind != "label"]
        order = rng.permutation(len(tappable))
        for j, idx in enumerate(order):
            w = tappable[idx]
            if j == 0 and s + 1 < n_screens:
                target = s + 1  # chain edge keeps every screen reachable
                chain.add((screen.id, w.id))
            else:
                # never the same screen: a cross-fade onto itself is invisible
                target = int(rng.integers(n_screens - 1))
                target += target >= s
            transitions[(screen.id, w.id)] = Transition(screens[target].id, random_timeline(rng, screens[target]))
    candidates = sorted(k for k in transitions if k[0] != screens[0].id and k not in chain)
    crash = {candidates[i] for i in rng.permutation(len(candidates))[:crash_points]}
    for key in crash:
        del transitions[key]
    launch = RenderTimeline(0.0, float(round(rng.uniform(300, 700))))
    return AppModel(name or f"app{seed}", screens, transitions, crash, seed, launch)


# standard crash-trace suite ------------------------------------------------

# name, steps, per-step timeline recipe
SUITE_RECIPES = [
    ("fade-100", 6, dict(transition=100)),
    ("fade-180", 8, dict(transition=180)),
    ("fade-500", 5, dict(transition=500)),
    ("fade-120-long", 10, dict(transition=120)),
    ("drift-250", 6, dict(transition=250, drift=1.5)),
    ("drift-400", 7, dict(transition=400, drift=1.5)),
    ("drift-600", 6, dict(transition=600, drift=1.5)),
    ("drift-900", 4, dict(transition=900, drift=1.2)),
    ("spinner-300", 5, dict(transition=100, explicit=200)),
    ("spinner-700", 8, dict(transition=150, explicit=550)),
    ("implicit-350", 6, dict(transition=100, implicit=250)),
    ("implicit-800", 4, dict(transition=300, implicit=500)),
    ("mixed-650", 9, dict(transition=200, drift=1.3, explicit=250, implicit=200)),
    ("slow-load-1400", 3, dict(transition=200, explicit=300, background_delay=900)),
]


def _suite_app(index: int, name: str, steps: int, recipe: dict) -> tuple[AppModel, CrashTrace]:
    rng = np.random.default_rng([index, 104729])
    n = steps  # screens s0..s{n-1}; the crash widget sits on the last screen
    screens = []
    for s in range(n):
        accent = _widget_color(rng)
        cells = _grid_layout(rng, n_cells_min=4)
        widgets = [_title(rng, accent)]
        target_cell = int(rng.integers(len(cells)))
        for i, b in enumerate(cells):
            if i == target_cell:
                wid = "crash" if s == n - 1 else "next"
                widgets.append(Widget(wid, b, _widget_color(rng), "button"))
            else:
                kind = "image" if (i == (target_cell + 1) % len(cells) and "background_delay" in recipe) else "button"
                widgets.append(Widget(f"d{i}", b, _widget_color(rng), kind))
        screens.append(Screen(f"s{s}", tuple(widgets), _background(rng)))
    transitions = {}
    for s in range(n):
        screen = screens[s]
        for w in screen.widgets:
            if w.id == "next":
                tgt = screens[s + 1]
                drift, implicit = {}, {}
                tw = next(x for x in tgt.widgets if x.id in ("next", "crash"))
                if "drift" in recipe:
                    drift[tw.id] = _drift_start(tw.bounds, rng, factor=recipe["drift"])
                if "implicit" in recipe:
                    implicit[tw.id] = float(recipe["implicit"])
                if "background_delay" in recipe:
                    img = next(x for x in tgt.widgets if x.kind == "image")
                    implicit[img.id] = float(recipe["background_delay"])
                tl = RenderTimeline(float(recipe.get("transition", 0)), float(recipe.get("explicit", 0)),
                                    implicit, drift)
                transitions[(screen.id, w.id)] = Transition(tgt.id, tl)
            elif w.id.startswith("d"):
                # distractors lead back to the start screen instantly
                transitions[(screen.id, w.id)] = Transition(screens[0].id, RenderTimeline(100.0))
    app = AppModel(name, screens, transitions, {(screens[-1].id, "crash")}, index)
    trace = CrashTrace(tuple((f"s{s}", "next") for s in range(n - 1)) + ((f"s{n - 1}", "crash"),), True, name)
    app.check_trace(trace)
    return app, trace


def standard_suite() -> list[tuple[AppModel, CrashTrace]]:
    return [_suite_app(i, name, steps, recipe) for i, (name, steps, recipe) in enumerate(SUITE_RECIPES)]


def random_tree_app(seed: int, n_screens: int = 40, branching: int = 2, crash_points: int = 2,
                    name: str | None = None) -> AppModel:
    """A hierarchical app: screens hang off a breadth-first tree, so deep ones need a path of taps.

    Every screen's first widgets open its children. Of the rest, half link up
    to a random ancestor and half do nothing.
    """
    rng = np.random.default_rng([seed, 104729])
    screens = _random_screens(rng, n_screens)
    children: dict[int, list[int]] = {i: [] for i in range(n_screens)}
    parent: dict[int, int | None] = {0: None}
    for c in range(1, n_screens):
        p = (c - 1) // branching
        children[p].append(c)
        parent[c] = p
    transitions, tree = {}, set()
    for s, screen in enumerate(screens):
        tappable = [w for w in screen.widgets if w.kind != "label"]
        if len(tappable) < len(children[s]):
            raise ValueError(f"screen s{s} has {len(tappable)} tappable widgets for {len(children[s])} children")
        ancestors, a = [], parent[s]
        while a is not None:
            ancestors.append(a)
            a = parent[a]
        for j, idx in enumerate(rng.permutation(len(tappable))):
            w = tappable[idx]
            if j < len(children[s]):
                target = children[s][j]
                tree.add((screen.id, w.id))
            elif ancestors and rng.uniform() < 0.5:
                target = ancestors[int(rng.integers(len(ancestors)))]
            else:
                continue
            transitions[(screen.id, w.id)] = Transition(screens[target].id, random_timeline(rng, screens[target]))
    candidates = sorted(k for k in transitions if k[0] != screens[0].id and k not in tree)
    crash = {candidates[i] for i in rng.permutation(len(candidates))[:crash_points]}
    for key in crash:
        del transitions[key]
    launch = RenderTimeline(0.0, float(round(rng.uniform(300, 700))))
    return AppModel(name or f"tree{seed}", screens, transitions, crash, seed, launch)


def exploration_apps(count: int = 8, base_seed: int = 5000) -> list[AppModel]:
    """Hierarchical apps, disjoint in seed from any training apps, for timed exploration."""
    return [random_tree_app(base_seed + i, name=f"explore{i}") for i in range(count)]
