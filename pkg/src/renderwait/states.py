"""Rendering-state labels shared across the pipeline."""

from enum import Enum


class Label(str, Enum):
    """Binary rendering label; the positive class is FULLY."""

    FULLY = "FullyRendered"
    PARTIALLY = "PartiallyRendered"

    def __str__(self):
        return self.value


class Phase(str, Enum):
    """Fine-grained ground truth produced by the device simulator."""

    FULLY = "FullyRendered"
    TRANSITING = "Transiting"
    EXPLICIT_LOADING = "ExplicitLoading"
    IMPLICIT_LOADING = "ImplicitLoading"

    def __str__(self):
        return self.value

    @property
    def binary(self) -> Label:
        return Label.FULLY if self is Phase.FULLY else Label.PARTIALLY
