"""Integer waiting times between measurements.

The Levy law has density ``alpha/(1+alpha)`` on ``[0, 1)`` and
``alpha/(1+alpha) * t**-(alpha+1)`` on ``[1, inf)``.  A continuous draw is
obtained by inverse transform and its integer part is the interval.  Draws
below 1 floor to 0; a zero interval never advances time, so by default they
are clamped to 1 (``zero_policy="clamp"``).  ``zero_policy="redraw"`` instead
conditions the draw on ``t >= 1``, which is the law of redrawing until the
integer part is positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels, streams

ZERO_POLICIES = ("clamp", "redraw")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    return alpha


@dataclass(frozen=True)
class Levy:
    alpha: float
    zero_policy: str = "clamp"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.zero_policy not in ZERO_POLICIES:
            raise ValueError(f"zero_policy must be one of {ZERO_POLICIES}, got {self.zero_policy!r}")


@dataclass(frozen=True)
class Fixed:
    period: int

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 1:
            raise ValueError(f"period must be an integer >= 1, got {self.period}")


@dataclass(frozen=True)
class GaussianBaseline:
    """Normal intervals rounded half-up and clamped below at 1."""

    mean: float
    stddev: float

    def __post_init__(self):
        if not (self.mean > 0 and self.stddev > 0):
            raise ValueError(f"mean and stddev must be positive, got {self.mean}, {self.stddev}")


WaitingTimeLaw = Union[Levy, Fixed, GaussianBaseline]


def kernel_params(law: WaitingTimeLaw) -> tuple[int, float, float, bool]:
    """Flatten a law to the ``(kind, p1, p2, redraw)`` tuple the kernels take."""
    if isinstance(law, Levy):
        return _kernels.LAW_LEVY, float(law.alpha), 0.0, law.zero_policy == "redraw"
    if isinstance(law, Fixed):
        return _kernels.LAW_FIXED, float(law.period), 0.0, False
    if isinstance(law, GaussianBaseline):
        return _kernels.LAW_GAUSS, float(law.mean), float(law.stddev), False
    raise TypeError(f"unknown waiting-time law {law!r}")


def levy_pdf(alpha: float, t):
    alpha = _check_alpha(alpha)
    t = np.asarray(t, dtype=np.float64)
    scale = alpha / (1.0 + alpha)
    with np.errstate(divide="ignore"):
        tail = scale * np.power(np.maximum(t, 1.0), -(alpha + 1.0))
    return np.where(t < 0, 0.0, np.where(t < 1.0, scale, tail))


def levy_cdf(alpha: float, t):
    alpha = _check_alpha(alpha)
    t = np.asarray(t, dtype=np.float64)
    knee = alpha / (1.0 + alpha)
    head = alpha * np.clip(t, 0.0, 1.0) / (1.0 + alpha)
    tail = knee + (1.0 - np.power(np.maximum(t, 1.0), -alpha)) / (1.0 + alpha)
    out = np.where(t < 1.0, head, tail)
    return out[()] if out.ndim == 0 else out


def levy_survival(alpha: float, t):
    """``P(t' > t)``; exact in the tail where ``1 - cdf`` would cancel."""
    alpha = _check_alpha(alpha)
    t = np.asarray(t, dtype=np.float64)
    tail = np.power(np.maximum(t, 1.0), -alpha) / (1.0 + alpha)
    out = np.where(t < 1.0, 1.0 - alpha * np.clip(t, 0.0, 1.0) / (1.0 + alpha), tail)
    return out[()] if out.ndim == 0 else out


def levy_inverse_cdf(alpha: float, u):
    alpha = _check_alpha(alpha)
    u = np.asarray(u, dtype=np.float64)
    if np.any((u < 0.0) | (u >= 1.0)):
        raise ValueError("u must lie in [0, 1)")
    knee = alpha / (1.0 + alpha)
    head = u * (1.0 + alpha) / alpha
    with np.errstate(divide="ignore"):
        tail = np.power((1.0 + alpha) * (1.0 - np.maximum(u, knee)), -1.0 / alpha)
    out = np.where(u < knee, head, tail)
    return out[()] if out.ndim == 0 else out


def sample_interval(law: WaitingTimeLaw, rng) -> int:
    """Draw one interval ``T >= 1``.

    Uniforms consumed from ``rng.random()``: none for ``Fixed``, one for
    ``Levy``, two for ``GaussianBaseline`` (Box-Muller).
    """
    kind, p1, p2, redraw = kernel_params(law)
    n = _kernels.uniforms_per_interval(kind)
    u1 = rng.random() if n >= 1 else 0.0
    u2 = rng.random() if n >= 2 else 0.0
    return int(_kernels.draw_interval(kind, p1, p2, redraw, u1, u2))


def sample_raw_levy(alpha: float, rng, size: int) -> np.ndarray:
    """Continuous draws ``t`` before taking the integer part."""
    return levy_inverse_cdf(alpha, rng.random(size))


def interval_block(law: WaitingTimeLaw, seed: int, index: int, size: int) -> np.ndarray:
    """First ``size`` intervals of trajectory ``index`` (what the engines draw)."""
    kind, p1, p2, redraw = kernel_params(law)
    key = np.uint64(streams.stream_key(streams.check_seed(seed), int(index), streams.LANE_WAIT))
    out = np.empty(int(size), dtype=np.int64)
    _kernels.draw_intervals(key, kind, p1, p2, redraw, out)
    return out
