"""Rendering-aware event scheduling for automated GUI testing.

The package infers whether a GUI screenshot is fully rendered and uses that
verdict to decide when a test tool may dispatch its next event.
"""

__version__ = "0.1.0"
