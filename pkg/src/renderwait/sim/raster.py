"""Deterministic rasteriser for simulated screens.

All drawing happens on float32 (h, w, 3) canvases; callers convert to uint8
once per frame.
"""

from __future__ import annotations

import zlib
from functools import lru_cache

import numpy as np

from .model import Bounds, Screen, Widget

PLACEHOLDER_GRAY = 168.0
PLACEHOLDER_STRIPE = 212.0
SHIMMER_PX_PER_MS = 0.12
SPINNER_DEG_PER_MS = 0.45
SPINNER_TICKS = 12
SCRIM = 0.5
# a transition's first frame already shows this much of the incoming screen
CROSSFADE_START = 0.3


def _hash(text: str) -> int:
    return zlib.crc32(text.encode())


def _clip_box(canvas: np.ndarray, b: Bounds) -> tuple[int, int, int, int] | None:
    h, w = canvas.shape[:2]
    x0, y0, x1, y1 = (int(round(v)) for v in b)
    x0, x1 = max(0, x0), min(w, x1)
    y0, y1 = max(0, y0), min(h, y1)
    if x0 >= x1 or y0 >= y1:
        return None
    return x0, y0, x1, y1


def draw_widget(canvas: np.ndarray, widget: Widget, bounds: Bounds | None = None) -> None:
    box = _clip_box(canvas, bounds or widget.bounds)
    if box is None:
        return
    x0, y0, x1, y1 = box
    color = np.asarray(widget.color, dtype=np.float32)
    canvas[y0:y1, x0:x1] = color * 0.55  # border
    if x1 - x0 > 4 and y1 - y0 > 4:
        canvas[y0 + 2:y1 - 2, x0 + 2:x1 - 2] = color
    luma = 0.299 * color[0] + 0.587 * color[1] + 0.114 * color[2]
    ink = np.float32(20.0 if luma > 110 else 250.0)
    seed = _hash(widget.id)
    if widget.kind == "image":
        # a little landscape: pale sky with a sun over a darker ridge, nothing
        # like the diagonal stripes of a loading placeholder
        yy, xx = np.mgrid[y0 + 4:y1 - 4, x0 + 4:x1 - 4]
        if yy.size:
            u = (xx - x0) / max(x1 - x0, 1)
            v = (yy - y0) / max(y1 - y0, 1)
            sky = 0.75 + 0.25 * (1 - v)
            ridge = v > 0.55 + 0.2 * np.abs(((u * (2 + seed % 3) + (seed % 7) / 7) % 1.0) - 0.5) * -2 + 0.2
            cx, cy = 0.25 + 0.5 * ((seed >> 4) % 8) / 7, 0.3
            sun = np.hypot(u - cx, (v - cy) * (y1 - y0) / max(x1 - x0, 1)) < 0.12
            shade = np.where(ridge, 0.45, np.where(sun, 1.0, sky))
            tint = np.where(sun[..., None], np.float32(250.0), color * shade[..., None] + (1 - shade[..., None]) * 40)
            canvas[y0 + 4:y1 - 4, x0 + 4:x1 - 4] = tint
        return
    # "text" lines
    row = y0 + 6
    i = 0
    while row + 3 <= y1 - 5:
        frac = 0.35 + 0.6 * (((seed >> (3 * i)) & 7) / 7)
        end = x0 + 6 + int((x1 - x0 - 12) * frac)
        if end > x0 + 6:
            canvas[row:row + 3, x0 + 6:end] = ink
        row += 7
        i += 1


def draw_placeholder(canvas: np.ndarray, widget: Widget, elapsed_ms: float, bounds: Bounds | None = None) -> None:
    box = _clip_box(canvas, bounds or widget.bounds)
    if box is None:
        return
    x0, y0, x1, y1 = box
    yy, xx = np.mgrid[y0:y1, x0:x1]
    phase = elapsed_ms * SHIMMER_PX_PER_MS
    stripes = ((xx + yy - phase) % 16) < 6
    canvas[y0:y1, x0:x1] = np.where(stripes, PLACEHOLDER_STRIPE, PLACEHOLDER_GRAY)[..., None]


@lru_cache(maxsize=8)
def _polar(h: int, w: int):
    cy, cx = h / 2.0, w / 2.0
    yy, xx = np.mgrid[0:h, 0:w]
    r = np.hypot(yy + 0.5 - cy, xx + 0.5 - cx)
    ang = np.degrees(np.arctan2(yy + 0.5 - cy, xx + 0.5 - cx)) % 360.0
    return r, ang


def draw_spinner(canvas: np.ndarray, elapsed_ms: float) -> None:
    """Dim the screen and draw a rotating 12-tick progress glyph at its centre."""
    h, w = canvas.shape[:2]
    canvas *= SCRIM
    r, ang = _polar(h, w)
    outer = 0.21 * min(h, w)
    inner = 0.4 * outer
    head = (elapsed_ms * SPINNER_DEG_PER_MS) % 360.0
    spacing = 360.0 / SPINNER_TICKS
    rel = (ang - head) % 360.0
    k = np.round(rel / spacing) % SPINNER_TICKS
    off = np.abs(rel - np.round(rel / spacing) * spacing)
    mask = (r >= inner) & (r <= outer) & (off * np.pi / 180.0 * np.maximum(r, 1) <= 2.6)
    # tick k trails the head by k steps; brightness fades along the tail
    level = 255.0 - k * (200.0 / SPINNER_TICKS)
    canvas[mask] = level[mask][:, None]


def render_screen(screen: Screen, width: int, height: int, elapsed_ms: float = float("inf"),
                  ready_at=None, bounds_of=None) -> np.ndarray:
    """Draw ``screen``; widgets not yet ready are drawn as shimmering placeholders."""
    canvas = np.empty((height, width, 3), dtype=np.float32)
    canvas[:] = np.asarray(screen.background, dtype=np.float32)
    for wdg in screen.widgets:
        b = bounds_of(wdg) if bounds_of else None
        if ready_at is not None and elapsed_ms < ready_at(wdg.id):
            draw_placeholder(canvas, wdg, elapsed_ms, b)
        else:
            draw_widget(canvas, wdg, b)
    return canvas


def black(width: int, height: int) -> np.ndarray:
    return np.zeros((height, width, 3), dtype=np.float32)


def to_uint8(canvas: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
