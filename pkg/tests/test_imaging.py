import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from renderwait.errors import DimensionMismatch, TooSmall
from renderwait.imaging import (C1, Frame, LuminanceMap, downscale, frame_similarity, rgb_to_luminance, ssim,
                                ssim_map)

from conftest import solid


def luma(values):
    return LuminanceMap(np.asarray(values, dtype=np.uint8))


def test_luminance_of_pure_colours():
    assert (rgb_to_luminance(solid((255, 255, 255))).luma == 255).all()
    assert (rgb_to_luminance(solid((0, 0, 0))).luma == 0).all()
    # 0.299 * 255 = 76.245
    assert (rgb_to_luminance(solid((255, 0, 0))).luma == 76).all()


def test_luminance_rounds_half_up():
    # 0.587 * 50 + 0.114 * 10 = 30.49
    assert rgb_to_luminance(solid((0, 50, 10))).luma[0, 0] == 30
    # 0.299 * 5 + 0.114 * 5 = 2.065, 0.299 * 10 + 0.587 * 5 + 0.114 * 40 = 10.485
    assert rgb_to_luminance(solid((5, 0, 5))).luma[0, 0] == 2
    assert rgb_to_luminance(solid((10, 5, 40))).luma[0, 0] == 10
    px = np.random.default_rng(0).integers(0, 256, (40, 40, 3), dtype=np.uint8)
    ref = np.floor(0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2] + 0.5 + 1e-9)
    assert np.array_equal(rgb_to_luminance(Frame(px)).luma, ref.astype(np.uint8))


@given(arrays(np.uint8, (3,)), st.integers(0, 2), st.integers(1, 255))
def test_luminance_monotone_in_each_channel(rgb, channel, bump):
    hi = rgb.copy()
    hi[channel] = min(255, int(hi[channel]) + bump)
    lo_y = rgb_to_luminance(solid(tuple(rgb), 2, 2)).luma[0, 0]
    hi_y = rgb_to_luminance(solid(tuple(hi), 2, 2)).luma[0, 0]
    assert hi_y >= lo_y


def test_ssim_identical_is_one():
    a = luma(np.random.default_rng(3).integers(0, 256, (30, 40)))
    assert abs(ssim(a, a) - 1.0) <= 1e-9


def test_ssim_black_vs_white_is_c1_ratio():
    expected = C1 / (255.0**2 + C1)
    assert expected == pytest.approx(9.999e-5, rel=1e-3)
    got = ssim(luma(np.zeros((20, 20))), luma(np.full((20, 20), 255)))
    assert got == pytest.approx(expected, abs=1e-12)


def test_ssim_errors():
    with pytest.raises(DimensionMismatch):
        ssim(luma(np.zeros((20, 20))), luma(np.zeros((20, 21))))
    with pytest.raises(TooSmall):
        ssim(luma(np.zeros((10, 20))), luma(np.zeros((10, 20))))
    with pytest.raises(TooSmall):
        ssim(luma(np.zeros((30, 30))), luma(np.zeros((30, 30))), scale=3)


def _ssim_direct(a, b):
    """Window-by-window SSIM with an explicit 11x11 Gaussian, the reference definition."""
    r = np.arange(11) - 5
    g = np.exp(-(r**2) / (2 * 1.5**2))
    w = np.outer(g, g)
    w /= w.sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    a, b = a.astype(np.float64), b.astype(np.float64)
    vals = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            pa, pb = a[i:i + 11, j:j + 11], b[i:i + 11, j:j + 11]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_ssim_matches_windowed_reference(rng):
    a = rng.integers(0, 256, (16, 19))
    b = np.clip(a + rng.integers(-40, 40, a.shape), 0, 255)
    ref = _ssim_direct(a, b)
    assert ssim_map(a.astype(float), b.astype(float)).mean() == pytest.approx(ref, abs=1e-9)
    assert ssim(luma(a), luma(b)) == pytest.approx(min(1.0, max(0.0, ref)), abs=1e-9)


@given(arrays(np.uint8, (14, 13)), arrays(np.uint8, (14, 13)))
def test_ssim_symmetric_and_in_range(a, b):
    s_ab, s_ba = ssim(luma(a), luma(b)), ssim(luma(b), luma(a))
    assert abs(s_ab - s_ba) < 1e-12
    assert 0.0 <= s_ab <= 1.0


@given(arrays(np.uint8, (12, 15)))
def test_ssim_self_similarity_property(a):
    assert abs(ssim(luma(a), luma(a)) - 1.0) <= 1e-9


def test_downscale_block_mean():
    x = np.arange(16, dtype=np.uint8).reshape(4, 4)
    assert np.array_equal(downscale(x, 2), [[2.5, 4.5], [10.5, 12.5]])
    assert downscale(np.zeros((5, 5)), 2).shape == (2, 2)


def test_frame_roundtrips(rng):
    px = rng.integers(0, 256, (7, 9, 3), dtype=np.uint8)
    f = Frame(px, 12.5)
    assert np.array_equal(Frame.from_rgb_bytes(f.to_rgb_bytes(), 9, 7).pixels, px)
    back = Frame.from_png(f.to_png(), 12.5)
    assert np.array_equal(back.pixels, px) and back.timestamp_ms == 12.5


def test_frame_similarity_of_equal_frames():
    f = solid((10, 200, 30), 20, 20)
    assert frame_similarity(f, f) == 1.0
