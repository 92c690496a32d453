"""Encoding of 3-axis gesture windows as recurrence-plot color images.

Each axis becomes an unthresholded recurrence plot (pairwise absolute
distances of the scalar series), the three plots are normalized jointly
by their global maximum so cross-axis amplitude relationships survive,
then resized and stacked as the R/G/B channels of one image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib import image as mpimage

DEFAULT_SIDE = 64


@dataclass
class AccImage:
    """side x side x 3 image in [0, 1]; channels are x/y/z recurrence plots."""

    pixels: np.ndarray
    source_window: object = None

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[1] or p.shape[2] != 3:
            raise ValueError(f"pixels must be square x 3, got {p.shape}")
        self.pixels = p

    @property
    def side(self) -> int:
        return self.pixels.shape[0]


def rp_channel(axis_signal) -> np.ndarray:
    """Unthresholded recurrence plot of a scalar series: M[i, j] = |x_i - x_j|."""
    x = np.asarray(axis_signal, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("axis signal must be 1-d with at least 2 samples")
    return np.abs(x[:, None] - x[None, :])


def _resize_axis(mat: np.ndarray, side: int, axis: int) -> np.ndarray:
    n = mat.shape[axis]
    if n == side:
        return mat
    pos = np.linspace(0.0, n - 1, side)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    w = pos - lo
    lo_vals = np.take(mat, lo, axis=axis)
    hi_vals = np.take(mat, hi, axis=axis)
    shape = [1, 1]
    shape[axis] = side
    w = w.reshape(shape)
    return lo_vals * (1.0 - w) + hi_vals * w


def resize_bilinear(mat: np.ndarray, side: int) -> np.ndarray:
    """Separable bilinear resize of a square matrix; identity when sizes match."""
    if side < 2:
        raise ValueError("target side must be >= 2")
    return _resize_axis(_resize_axis(np.asarray(mat, dtype=float), side, 0), side, 1)


def encode_acc_image(window_x, window_y, window_z, side: int = DEFAULT_SIDE,
                     source_window=None) -> AccImage:
    """Encode three equal-length axis windows as one recurrence-plot image.

    Channels are normalized by the joint maximum over all three plots
    (an all-constant window maps to the zero image).
    """
    wx = np.asarray(window_x, dtype=float)
    wy = np.asarray(window_y, dtype=float)
    wz = np.asarray(window_z, dtype=float)
    if not (wx.size == wy.size == wz.size):
        raise ValueError(f"axis windows must have equal length, "
                         f"got {wx.size}/{wy.size}/{wz.size}")
    plots = [rp_channel(w) for w in (wx, wy, wz)]
    peak = max(float(p.max()) for p in plots)
    if peak > 0.0:
        plots = [p / peak for p in plots]
    channels = [resize_bilinear(p, side) for p in plots]
    return AccImage(pixels=np.stack(channels, axis=2), source_window=source_window)


def save_png(image: AccImage, path) -> None:
    """Dump an 8-bit PNG for inspection; training always consumes the
    real-valued pixels, never this quantized copy."""
    mpimage.imsave(str(path), np.clip(image.pixels, 0.0, 1.0))
