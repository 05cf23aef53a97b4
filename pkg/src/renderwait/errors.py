"""Exception hierarchy shared by all modules."""


class RenderWaitError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(RenderWaitError, ValueError):
    pass


class TooSmall(RenderWaitError, ValueError):
    pass


class TooFewFrames(RenderWaitError, ValueError):
    pass


class EmptyInput(RenderWaitError, ValueError):
    pass


class ShapeMismatch(RenderWaitError, ValueError):
    pass


class UninitializedModel(RenderWaitError, RuntimeError):
    pass


class DegenerateDataset(RenderWaitError, ValueError):
    pass


class TooFewApps(RenderWaitError, ValueError):
    pass


class EmptyDataset(RenderWaitError, ValueError):
    pass


class InvalidScript(RenderWaitError, ValueError):
    pass


class EmptyPayload(RenderWaitError, ValueError):
    pass


class Truncated(RenderWaitError, EOFError):
    pass


class Disconnected(RenderWaitError, ConnectionError):
    pass


class StreamLost(RenderWaitError, ConnectionError):
    pass


class InsufficientFrames(RenderWaitError, ValueError):
    pass


class ScreencastError(RenderWaitError):
    """Wraps a per-screencast failure with the offending screencast id."""

    def __init__(self, screencast_id, cause):
        super().__init__(f"screencast {screencast_id!r}: {cause}")
        self.screencast_id = screencast_id
        self.cause = cause
