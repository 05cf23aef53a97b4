"""Deterministic device simulator standing in for real apps."""

from .device import DeviceSession, Outcome, ScriptEvent, TapResult, frame_at, generate_screencast, random_script, tap
from .model import AppModel, CrashTrace, RenderTimeline, Screen, Transition, Widget, load_app, save_app
from .suite import exploration_apps, random_app, standard_suite

__all__ = [
    "AppModel", "CrashTrace", "DeviceSession", "Outcome", "RenderTimeline", "Screen", "ScriptEvent",
    "TapResult", "Transition", "Widget", "exploration_apps", "frame_at", "generate_screencast", "load_app",
    "random_app", "random_script", "save_app", "standard_suite", "tap",
]
