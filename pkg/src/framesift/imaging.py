"""Image kernels: box-mean downscaling and the SSIM similarity score.

These are the two primitives behind near-duplicate detection: frames
are first downscaled by integer box averaging (which suppresses
per-pixel sensor noise), then compared with SSIM. The composed
operation is :func:`pair_score`.

All arithmetic runs in float64; only the downscaled frame is
re-quantized to 8 bits, which keeps scores bit-reproducible.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionMismatchError
from .frames import Frame

Window = Literal["gaussian_11_sigma_1_5", "uniform_7", "global"]

_WINDOW_NAMES = ("gaussian_11_sigma_1_5", "uniform_7", "global")


@dataclass(frozen=True)
class ScaleFactor:
    """Downscale factor 1/inverse; inverse = 1 is the identity."""

    inverse: int = 1

    def __post_init__(self):
        try:
            inverse = operator.index(self.inverse)
        except TypeError:
            raise ValueError(f"inverse must be an integer, got {self.inverse!r}") from None
        if inverse < 1:
            raise ValueError(f"inverse must be >= 1, got {inverse}")
        object.__setattr__(self, "inverse", inverse)


@dataclass(frozen=True)
class SsimParams:
    """SSIM stabilizer constants and windowing mode.

    dynamic_range is the intensity span L (255 for 8-bit data); the
    stabilizers are C1 = (k1 L)^2 and C2 = (k2 L)^2. With
    window="global" the statistics are computed once over the whole
    image, which is the right choice for heavily downscaled frames
    that are smaller than a conventional window.
    """

    dynamic_range: float = 255.0
    k1: float = 0.01
    k2: float = 0.03
    window: Window = "global"

    def __post_init__(self):
        if self.dynamic_range <= 0:
            raise ValueError("dynamic_range must be > 0")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be > 0")
        if self.window not in _WINDOW_NAMES:
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


@dataclass(frozen=True)
class SsimResult:
    """SSIM score plus which statistics window was actually used."""

    score: float
    window: Window
    effective_window: Window
    fallback: bool


def downscale(frame: Frame, scale: ScaleFactor | int) -> Frame:
    """Shrink a frame by box averaging.

    Output dims are ceil(w / inverse) x ceil(h / inverse); each output
    pixel is the arithmetic mean of its source box (truncated at the
    right/bottom edges), rounded half away from zero back to uint8.
    """
    inverse = scale.inverse if isinstance(scale, ScaleFactor) else ScaleFactor(scale).inverse
    if inverse == 1:
        return frame
    h, w = frame.shape
    row_starts = np.arange(0, h, inverse)
    col_starts = np.arange(0, w, inverse)
    sums = np.add.reduceat(
        np.add.reduceat(frame.pixels.astype(np.int64), row_starts, axis=0),
        col_starts,
        axis=1,
    )
    row_counts = np.minimum(row_starts + inverse, h) - row_starts
    col_counts = np.minimum(col_starts + inverse, w) - col_starts
    counts = np.outer(row_counts, col_counts)
    means = sums / counts
    quantized = np.floor(means + 0.5)
    return Frame(pixels=np.clip(quantized, 0, 255).astype(np.uint8))


def ssim(a: Frame, b: Frame, params: SsimParams = SsimParams()) -> float:
    """SSIM score in [-1, 1] between two equal-size frames."""
    return ssim_result(a, b, params).score


def ssim_result(a: Frame, b: Frame, params: SsimParams = SsimParams()) -> SsimResult:
    """SSIM with metadata: falls back to global statistics (and says
    so) when the image is smaller than the requested window."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"frame dimensions differ: {a.shape} vs {b.shape}")
    x = a.pixels.astype(np.float64)
    y = b.pixels.astype(np.float64)

    effective: Window = params.window
    if params.window != "global":
        kernel = _window_kernel(params.window)
        if a.height < kernel.shape[0] or a.width < kernel.shape[1]:
            effective = "global"

    if effective == "global":
        score = _ssim_value(
            x.mean(), y.mean(),
            (x * x).mean(), (y * y).mean(), (x * y).mean(),
            params.c1, params.c2,
        )
    else:
        mu_x = convolve2d(x, kernel, mode="valid")
        mu_y = convolve2d(y, kernel, mode="valid")
        e_xx = convolve2d(x * x, kernel, mode="valid")
        e_yy = convolve2d(y * y, kernel, mode="valid")
        e_xy = convolve2d(x * y, kernel, mode="valid")
        score = float(
            np.mean(_ssim_value(mu_x, mu_y, e_xx, e_yy, e_xy, params.c1, params.c2))
        )
    score = min(1.0, max(-1.0, float(score)))
    return SsimResult(
        score=score,
        window=params.window,
        effective_window=effective,
        fallback=effective != params.window,
    )


def _ssim_value(mu_x, mu_y, e_xx, e_yy, e_xy, c1, c2):
    # Population statistics, written so that a == b yields bitwise-equal
    # numerator and denominator (mu_x*mu_x rather than **2, variances
    # left unclamped): ssim(x, x) is then exactly 1. Round-off can make
    # a zero variance fractionally negative, but c2 > 0 keeps the
    # denominator positive and the final score is clipped to [-1, 1].
    var_x = e_xx - mu_x * mu_x
    var_y = e_yy - mu_y * mu_y
    cov = e_xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def _window_kernel(window: Window) -> np.ndarray:
    if window == "uniform_7":
        return np.full((7, 7), 1.0 / 49.0)
    if window == "gaussian_11_sigma_1_5":
        ax = np.arange(11, dtype=np.float64) - 5.0
        g = np.exp(-(ax * ax) / (2.0 * 1.5 * 1.5))
        kernel = np.outer(g, g)
        return kernel / kernel.sum()
    raise ValueError(f"no kernel for window {window!r}")


def pair_score(
    a: Frame, b: Frame, scale: ScaleFactor | int, params: SsimParams = SsimParams()
) -> float:
    """Similarity feature for deduplication: SSIM of the two frames
    after box-mean downscaling. Equals
    ssim(downscale(a, scale), downscale(b, scale), params)."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"frame dimensions differ: {a.shape} vs {b.shape}")
    return ssim(downscale(a, scale), downscale(b, scale), params)
