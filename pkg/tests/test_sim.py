import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renderwait.errors import InvalidScript
from renderwait.scheduler import FixedPolicy, run_trace
from renderwait.segmenter import segment
from renderwait.sim import raster
from renderwait.sim.corpus import CorpusConfig, iter_screencasts
from renderwait.sim.device import DeviceSession, Outcome, ScriptEvent, generate_screencast, random_script
from renderwait.sim.model import (AppModel, CrashTrace, RenderTimeline, Screen, Transition, Widget, app_from_dict,
                                  app_to_dict)
from renderwait.sim.suite import exploration_apps, random_app, random_tree_app, standard_suite
from renderwait.states import Label, Phase

BG = (240, 240, 240)


def _two_screen_app(timeline, crash=False):
    a = Screen("a", (Widget("go", (20, 40, 120, 90), (200, 40, 40)), Widget("boom", (200, 40, 300, 90), (40, 40, 200))), BG)
    b = Screen("b", (Widget("back", (150, 100, 260, 160), (40, 160, 40), "image"),), (30, 30, 40))
    transitions = {("a", "go"): Transition("b", timeline), ("b", "back"): Transition("a")}
    return AppModel("two", [a, b], transitions, {("a", "boom")} if crash else set())


def test_timeline_total():
    tl = RenderTimeline(100, 250, {"x": 80, "y": 40})
    assert tl.total_ms == 430
    assert tl.ready_at("x") == 430 and tl.ready_at("z") == 0
    with pytest.raises(ValueError):
        RenderTimeline(-1)


def test_model_validation():
    with pytest.raises(ValueError):
        AppModel("bad", [Screen("a", (Widget("w", (0, 0, 400, 10), BG),), BG)], {})
    a = Screen("a", (Widget("w", (0, 0, 10, 10), BG),), BG)
    b = Screen("b", (), BG)
    with pytest.raises(ValueError, match="unreachable"):
        AppModel("island", [a, b], {})
    with pytest.raises(ValueError):
        AppModel("dangling", [a], {("a", "w"): Transition("zzz")})


def test_phases_follow_the_timeline():
    s = DeviceSession(_two_screen_app(RenderTimeline(100, 200, {"back": 150})))
    assert s.tap_widget("go", 1000.0).outcome is Outcome.NAVIGATED
    assert s.phase_at(1000.0) is Phase.TRANSITING
    assert s.phase_at(1099.9) is Phase.TRANSITING
    assert s.phase_at(1100.0) is Phase.EXPLICIT_LOADING
    assert s.phase_at(1300.0) is Phase.IMPLICIT_LOADING
    assert s.phase_at(1450.0) is Phase.FULLY


def test_fully_rendered_frame_is_final_raster_and_constant():
    s = DeviceSession(_two_screen_app(RenderTimeline(100, 200)))
    s.tap_widget("go", 0.0)
    final = raster.to_uint8(raster.render_screen(s.app.screen("b"), s.app.width, s.app.height))
    f1, p1 = s.frame_at(300.0)
    f2, _ = s.frame_at(5000.0)
    assert p1 is Phase.FULLY
    assert np.array_equal(f1.pixels, final) and np.array_equal(f2.pixels, final)


def test_spinner_frames_differ():
    s = DeviceSession(_two_screen_app(RenderTimeline(0, 500)))
    s.tap_widget("go", 0.0)
    (a, pa), (b, pb) = s.frame_at(100.0), s.frame_at(133.3)
    assert pa is pb is Phase.EXPLICIT_LOADING
    assert not np.array_equal(a.pixels, b.pixels)


def test_placeholder_is_gray_and_untappable():
    s = DeviceSession(_two_screen_app(RenderTimeline(0, 0, {"back": 300})))
    s.tap_widget("go", 0.0)
    frame, phase = s.frame_at(100.0)
    assert phase is Phase.IMPLICIT_LOADING
    x0, y0, x1, y1 = s.app.screen("b").widget("back").bounds
    patch = frame.pixels[y0:y1, x0:x1].astype(int)
    assert (np.abs(patch[..., 0] - patch[..., 1]) <= 1).all()  # gray, not the widget's green
    assert s.tap_widget("back", 100.0).outcome is Outcome.MISSED
    assert s.tap_widget("back", 300.0).outcome is Outcome.NAVIGATED


def test_taps_during_explicit_loading_miss():
    s = DeviceSession(_two_screen_app(RenderTimeline(0, 400)))
    s.tap_widget("go", 0.0)
    assert s.tap_widget("back", 200.0).outcome is Outcome.MISSED
    assert s.tap_widget("back", 400.0).screen == "a"


def test_drifting_widget_misses_at_final_bounds_then_hits():
    final = (150, 100, 260, 160)
    tl = RenderTimeline(600, 0, {}, {"back": (20, 100, 130, 160)})
    s = DeviceSession(_two_screen_app(tl))
    s.tap_widget("go", 0.0)
    assert s.tap_widget("back", 200.0).outcome is Outcome.MISSED
    assert s.tap_widget("back", 600.0).outcome is Outcome.NAVIGATED
    # mid-drift the widget answers at its interpolated position
    s2 = DeviceSession(_two_screen_app(tl))
    s2.tap_widget("go", 0.0)
    w = s2.hit_test(90, 130, 300.0)  # halfway: x spans [85, 195)
    assert w is not None and w.id == "back"
    assert final == s2.app.screen("b").widget("back").bounds


def test_tap_crash_point_and_bounds():
    s = DeviceSession(_two_screen_app(RenderTimeline(), crash=True))
    assert s.tap_widget("boom", 0.0).outcome is Outcome.CRASHED
    assert s.tap_widget("go", 10.0).outcome is Outcome.MISSED  # crashed device ignores input
    s.restart(20.0)
    assert s.screen == "a" and not s.crashed
    with pytest.raises(ValueError):
        s.tap(-1, 5, 30.0)
    assert s.tap(5, 200, 30.0).outcome is Outcome.MISSED


def test_600ms_rendering_at_30fps_gives_18_partial_frames():
    app = _two_screen_app(RenderTimeline(600))
    cast = generate_screencast(app, [ScriptEvent(100.0, "go")], fps=30, tail_ms=900)
    binary = [p.binary for p in cast.truth]
    first = binary.index(Label.PARTIALLY)
    run = binary[first:].index(Label.FULLY)
    assert run == 18
    assert all(b is Label.FULLY for b in binary[first + run:])


def test_zero_duration_timeline_is_always_fully_rendered():
    cast = generate_screencast(_two_screen_app(RenderTimeline()), [ScriptEvent(100.0, "go"),
                                                                   ScriptEvent(300.0, "back")], fps=30)
    assert set(cast.truth) == {Phase.FULLY}


def test_screencast_determinism():
    app = random_app(3)
    script = random_script(app, np.random.default_rng(0), 4)
    a = generate_screencast(app, script, 10, seed=9)
    b = generate_screencast(app, script, 10, seed=9)
    assert all(np.array_equal(x.pixels, y.pixels) and x.timestamp_ms == y.timestamp_ms
               for x, y in zip(a.frames, b.frames))
    assert a.truth == b.truth


def test_unknown_widget_in_script():
    with pytest.raises(InvalidScript):
        generate_screencast(_two_screen_app(RenderTimeline()), [ScriptEvent(0.0, "nope")], 10)
    with pytest.raises(ValueError):
        generate_screencast(_two_screen_app(RenderTimeline()), [], 0)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_random_apps_are_valid_and_roundtrip(seed):
    app = random_app(seed)
    assert app.reachable() == {s.id for s in app.screens}
    back, _ = app_from_dict(app_to_dict(app))
    assert back.transitions == app.transitions and back.crash_points == app.crash_points


@settings(max_examples=20)
@given(st.integers(0, 1000), st.floats(0, 3000))
def test_fully_rendered_frames_are_steady(seed, dt):
    app = random_app(seed)
    s = DeviceSession(app)
    w = next(w for w in app.screen(app.start).widgets if (app.start, w.id) in app.transitions)
    s.tap_widget(w.id, 0.0)
    t = s.timeline.total_ms
    a, pa = s.frame_at(t)
    b, pb = s.frame_at(t + dt)
    assert pa is pb is Phase.FULLY
    assert np.array_equal(a.pixels, b.pixels)


def test_standard_suite_shape():
    suite = standard_suite()
    assert len(suite) >= 12
    totals = [max(tr.timeline.total_ms for tr in app.transitions.values()) for app, _ in suite]
    assert min(totals) <= 100 and any(t >= 900 for t in totals) and max(totals) > 1000
    assert sum(1 for app, _ in suite if any(tr.timeline.widget_drift for tr in app.transitions.values())) >= 3


@pytest.mark.parametrize("index", range(14))
def test_oracle_replay_reaches_the_crash(index):
    app, trace = standard_suite()[index]
    s = DeviceSession(app, launched=False)
    t = s.timeline.total_ms
    for i, (screen_id, widget_id) in enumerate(trace.steps):
        assert s.screen == screen_id
        res = s.tap_widget(widget_id, t)
        if i == len(trace.steps) - 1:
            assert res.outcome is Outcome.CRASHED
        else:
            assert res.outcome is Outcome.NAVIGATED
            t += s.timeline.total_ms


@pytest.mark.parametrize("name", ["drift-600", "drift-900"])
def test_drift_apps_fail_under_fixed_200(name):
    app, trace = next((a, t) for a, t in standard_suite() if a.name == name)
    res = run_trace(app, trace, FixedPolicy(200))
    assert not res.reproduced and res.failed_step is not None


def test_exploration_apps_are_disjoint_and_large():
    apps = exploration_apps()
    assert len(apps) == 8 and all(len(a.screens) == 40 and len(a.crash_points) == 2 for a in apps)
    assert len({a.seed for a in apps}) == 8 and min(a.seed for a in apps) >= 5000


def _depths(app):
    """Shortest tap distance of every screen from the start screen."""
    depth, frontier = {app.start: 0}, [app.start]
    while frontier:
        nxt = []
        for (src, _), tr in sorted(app.transitions.items()):
            if src in frontier and tr.target not in depth:
                depth[tr.target] = depth[src] + 1
                nxt.append(tr.target)
        frontier = nxt
    return depth


@pytest.mark.parametrize("n,branching", [(40, 2), (13, 3), (2, 1)])
def test_tree_app_depth_follows_the_breadth_first_tree(n, branching):
    app = random_tree_app(9, n, branching)
    depth = _depths(app)
    assert len(depth) == n
    for c in range(1, n):
        assert depth[f"s{c}"] == depth[f"s{(c - 1) // branching}"] + 1
    assert not any(k[0] == app.start for k in app.crash_points)


def test_tree_app_links_only_down_the_tree_or_up_to_ancestors():
    app = random_tree_app(3)
    parent = {c: (c - 1) // 2 for c in range(1, 40)}

    def ancestors(c):
        while c in parent:
            c = parent[c]
            yield c

    for (src, _), tr in app.transitions.items():
        s, t = int(src[1:]), int(tr.target[1:])
        assert parent.get(t) == s or t in set(ancestors(s))


def test_back_stack():
    a = Screen("a", (Widget("go", (10, 30, 100, 90), (200, 40, 40)),), (240, 240, 240))
    b = Screen("b", (Widget("go", (10, 30, 100, 90), (40, 40, 200)), Widget("x", (200, 30, 300, 90), (9, 9, 9))),
               (250, 250, 250))
    c = Screen("c", (), (20, 20, 20))
    app = AppModel("t", [a, b, c], {("a", "go"): Transition("b", RenderTimeline(0)),
                                    ("b", "go"): Transition("c", RenderTimeline(300))}, {("b", "x")})
    s = DeviceSession(app)
    assert s.back(0).outcome is Outcome.MISSED  # nothing to go back to
    s.tap_widget("go", 10)
    s.tap_widget("go", 20)
    assert s.screen == "c" and s.back_stack == ["a", "b"]
    res = s.back(400)
    assert res.outcome is Outcome.NAVIGATED and res.screen == "b" and s.back_stack == ["a"]
    assert s.phase_at(400) is Phase.TRANSITING and s.phase_at(550) is Phase.FULLY
    assert s.tap_widget("x", 600).outcome is Outcome.CRASHED
    assert s.back(700).outcome is Outcome.MISSED
    s.restart(800)
    assert s.screen == "a" and s.back_stack == []


def test_interactable_widgets_by_phase():
    img = Widget("img", (200, 40, 300, 120), (50, 150, 50), "image")
    btn = Widget("btn", (20, 40, 120, 120), (150, 50, 50))
    home = Screen("h", (Widget("go", (10, 30, 100, 90), (200, 40, 40)),), (240, 240, 240))
    dest = Screen("d", (btn, img), (250, 250, 250))
    tl = RenderTimeline(100, 200, {"img": 150})
    app = AppModel("t", [home, dest], {("h", "go"): Transition("d", tl)}, set())
    s = DeviceSession(app)
    s.tap_widget("go", 0)
    ids = lambda t: [w.id for w in s.interactable(t)]
    assert ids(50) == ["btn"]  # cross-fading and interactive, the image already a placeholder
    assert ids(150) == []  # spinner
    assert ids(320) == ["btn"]  # image still a placeholder
    assert ids(450) == ["btn", "img"]


def test_segmenter_agrees_with_ground_truth_on_slow_timelines():
    """At 30 fps with every rendering >= 200 ms, segment labels match the
    simulator on at least 95% of frames."""
    rng = np.random.default_rng(0)
    agree = total = 0
    for seed in range(3):
        app = random_app(100 + seed)
        slow = {k: Transition(v.target, RenderTimeline(max(v.timeline.transition_ms, 200.0),
                                                       v.timeline.explicit_loading_ms,
                                                       v.timeline.implicit_delays, v.timeline.widget_drift))
                for k, v in app.transitions.items()}
        app = AppModel(app.name, app.screens, slow, app.crash_points, app.seed, app.launch)
        cast = generate_screencast(app, random_script(app, rng, 5, (600, 900)), 30, seed=seed)
        labels = [None] * len(cast.frames)
        for g in segment(cast.frames):
            for i in g.frame_indices:
                labels[i] = g.label
        agree += sum(lab is ph.binary for lab, ph in zip(labels, cast.truth))
        total += len(labels)
    assert agree / total >= 0.95


def test_corpus_is_lazy_and_seeded():
    cfg = CorpusConfig(n_apps=2, casts_per_app=1, events_per_cast=2, fps=5)
    it = iter_screencasts(cfg)
    first = next(it)
    again = next(iter_screencasts(cfg))
    assert first.id == again.id and len(first.frames) == len(again.frames)
    assert all(np.array_equal(a.pixels, b.pixels) for a, b in zip(first.frames, again.frames))
