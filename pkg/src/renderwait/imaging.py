"""Pixel primitives: frames, luma conversion and SSIM between frames."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .errors import DimensionMismatch, TooSmall

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DYNAMIC_RANGE = 255.0
C1 = (K1 * DYNAMIC_RANGE) ** 2
C2 = (K2 * DYNAMIC_RANGE) ** 2


@dataclass(frozen=True)
class Frame:
    """One RGB screenshot. ``pixels`` is a (height, width, 3) uint8 array."""

    pixels: np.ndarray
    timestamp_ms: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixels, got shape {px.shape}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise ValueError("frame must be non-empty")
        if px.dtype != np.uint8:
            px = np.clip(px, 0, 255).astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_timestamp(self, timestamp_ms: float) -> "Frame":
        return Frame(self.pixels, timestamp_ms)

    @classmethod
    def from_rgb_bytes(cls, blob: bytes, width: int, height: int, timestamp_ms: float = 0.0) -> "Frame":
        if len(blob) != width * height * 3:
            raise DimensionMismatch(f"{len(blob)} bytes cannot hold a {width}x{height} RGB frame")
        px = np.frombuffer(blob, dtype=np.uint8).reshape(height, width, 3).copy()
        return cls(px, timestamp_ms)

    def to_rgb_bytes(self) -> bytes:
        return self.pixels.tobytes()

    @classmethod
    def from_png(cls, data: bytes | str, timestamp_ms: float = 0.0) -> "Frame":
        src = io.BytesIO(data) if isinstance(data, (bytes, bytearray)) else data
        with Image.open(src) as im:
            return cls(np.array(im.convert("RGB")), timestamp_ms)

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        # compress_level 1: frames are streamed, size matters less than latency
        Image.fromarray(self.pixels, "RGB").save(buf, format="PNG", compress_level=1)
        return buf.getvalue()


@dataclass(frozen=True)
class LuminanceMap:
    luma: np.ndarray = field(repr=False)

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[0]


def rgb_to_luminance(frame: Frame) -> LuminanceMap:
    """BT.601 luma, rounded half-up to 8 bits.

    Integer arithmetic keeps the rounding exact: ``(299 R + 587 G + 114 B + 500) // 1000``.
    """
    px = frame.pixels.astype(np.int32)
    y = (299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2] + 500) // 1000
    return LuminanceMap(np.clip(y, 0, 255).astype(np.uint8))


def downscale(luma: np.ndarray, factor: int) -> np.ndarray:
    """Block-average by an integer factor (trailing rows/cols that don't fill a block are dropped)."""
    if factor == 1:
        return luma.astype(np.float64)
    h, w = luma.shape[0] // factor, luma.shape[1] // factor
    blocks = luma[: h * factor, : w * factor].astype(np.float64)
    return blocks.reshape(h, factor, w, factor).mean(axis=(1, 3))


def _gaussian_window() -> np.ndarray:
    r = np.arange(WINDOW_SIZE) - WINDOW_SIZE // 2
    g = np.exp(-(r**2) / (2 * WINDOW_SIGMA**2))
    return g / g.sum()


_WINDOW = _gaussian_window()


def _filter_valid(img: np.ndarray) -> np.ndarray:
    out = correlate1d(img, _WINDOW, axis=0, mode="constant")
    out = correlate1d(out, _WINDOW, axis=1, mode="constant")
    m = WINDOW_SIZE // 2
    return out[m:-m, m:-m]


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Local SSIM over every full 11x11 window of two float luma planes."""
    mu_a = _filter_valid(a)
    mu_b = _filter_valid(b)
    mu_ab = mu_a * mu_b
    mu_a2 = mu_a * mu_a
    mu_b2 = mu_b * mu_b
    var_a = _filter_valid(a * a) - mu_a2
    var_b = _filter_valid(b * b) - mu_b2
    cov = _filter_valid(a * b) - mu_ab
    num = (2 * mu_ab + C1) * (2 * cov + C2)
    den = (mu_a2 + mu_b2 + C1) * (var_a + var_b + C2)
    return num / den


def ssim(a: LuminanceMap, b: LuminanceMap, scale: int = 1) -> float:
    """Mean SSIM between two luma maps, clamped to [0, 1].

    ``scale`` block-averages both maps by an integer factor first.
    """
    if a.luma.shape != b.luma.shape:
        raise DimensionMismatch(f"shape {a.luma.shape} != {b.luma.shape}")
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    la, lb = downscale(a.luma, scale), downscale(b.luma, scale)
    if min(la.shape) < WINDOW_SIZE:
        raise TooSmall(f"{la.shape} is smaller than the {WINDOW_SIZE}x{WINDOW_SIZE} window")
    value = float(ssim_map(la, lb).mean())
    return min(1.0, max(0.0, value))


def frame_similarity(f0: Frame, f1: Frame, scale: int = 1) -> float:
    return ssim(rgb_to_luminance(f0), rgb_to_luminance(f1), scale)
