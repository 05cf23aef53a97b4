"""Screencasts and their on-disk manifest format.

A screencast directory holds one PNG per frame plus ``manifest.txt``::

    # screencast v1
    id login-flow-3
    app shop
    fps 30
    frame 0 0.000 f00000.png FullyRendered
    frame 1 33.333 f00001.png Transiting
    action tap 100.0 100.0
    action scroll 1200.0 1800.0

The trailing ground-truth column of ``frame`` lines is optional. ``action``
lines give ``kind start_ms end_ms``; frames inside a ``scroll`` interval are
excluded from dataset building.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .imaging import Frame
from .states import Phase

MANIFEST_NAME = "manifest.txt"


@dataclass(frozen=True)
class ActionInterval:
    kind: str
    start_ms: float
    end_ms: float

    def covers(self, t: float) -> bool:
        return self.start_ms <= t <= self.end_ms


@dataclass
class Screencast:
    id: str
    frames: list[Frame]
    app_id: str = ""
    fps: float = 30.0
    actions: list[ActionInterval] = field(default_factory=list)
    truth: list[Phase] | None = None

    def __len__(self):
        return len(self.frames)

    def kept_spans(self) -> list[tuple[int, int]]:
        """Half-open index spans left after dropping frames inside scroll intervals."""
        scrolls = [a for a in self.actions if a.kind == "scroll"]
        spans, start = [], None
        for i, f in enumerate(self.frames):
            dropped = any(a.covers(f.timestamp_ms) for a in scrolls)
            if dropped and start is not None:
                spans.append((start, i))
                start = None
            elif not dropped and start is None:
                start = i
        if start is not None:
            spans.append((start, len(self.frames)))
        return spans


def write_screencast(cast: Screencast, directory: str | Path) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["# screencast v1", f"id {cast.id}"]
    if cast.app_id:
        lines.append(f"app {cast.app_id}")
    lines.append(f"fps {cast.fps:g}")
    for i, frame in enumerate(cast.frames):
        name = f"f{i:05d}.png"
        (out / name).write_bytes(frame.to_png())
        row = f"frame {i} {frame.timestamp_ms:.3f} {name}"
        if cast.truth is not None:
            row += f" {cast.truth[i]}"
        lines.append(row)
    for a in cast.actions:
        lines.append(f"action {a.kind} {a.start_ms:.3f} {a.end_ms:.3f}")
    (out / MANIFEST_NAME).write_text("\n".join(lines) + "\n")
    return out


def _parse_manifest(directory: str | Path):
    root = Path(directory)
    manifest = root / MANIFEST_NAME if root.is_dir() else root
    root = manifest.parent
    if not manifest.is_file():
        raise FileNotFoundError(f"no screencast manifest at {manifest}")
    cast_id, app_id, fps = root.name, "", 30.0
    rows: list[tuple[int, float, str, str | None]] = []
    actions = []
    for lineno, raw in enumerate(manifest.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, *rest = line.split()
        if key == "id":
            cast_id = rest[0]
        elif key == "app":
            app_id = rest[0]
        elif key == "fps":
            fps = float(rest[0])
        elif key == "frame":
            idx, ts, name = int(rest[0]), float(rest[1]), rest[2]
            rows.append((idx, ts, name, rest[3] if len(rest) > 3 else None))
        elif key == "action":
            actions.append(ActionInterval(rest[0], float(rest[1]), float(rest[2])))
        else:
            raise ValueError(f"{manifest}:{lineno}: unknown record {key!r}")
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError(f"{manifest}: frame indices are not contiguous from 0")
    return root, cast_id, app_id, fps, rows, actions


def read_screencast(directory: str | Path) -> Screencast:
    root, cast_id, app_id, fps, rows, actions = _parse_manifest(directory)
    frames = [Frame.from_png((root / name).read_bytes(), ts) for _, ts, name, _ in rows]
    truth = None
    if rows and all(r[3] is not None for r in rows):
        truth = [Phase(r[3]) for r in rows]
    return Screencast(cast_id, frames, app_id=app_id, fps=fps, actions=actions, truth=truth)


def read_frames(directory: str | Path, indices) -> dict[int, Frame]:
    """Decode only the frames at ``indices`` of a stored screencast."""
    root, _, _, _, rows, _ = _parse_manifest(directory)
    out = {}
    for i in sorted(set(indices)):
        _, ts, name, _ = rows[i]
        out[i] = Frame.from_png((root / name).read_bytes(), ts)
    return out
