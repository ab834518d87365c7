"""Closed-form exponent predictions and power-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import integrate, stats

from .waiting import Fixed, GaussianBaseline, Levy

SINGULAR_TOL = 1e-8


@dataclass(frozen=True)
class MomentPair:
    first: float
    second: float
    horizon: float


@dataclass(frozen=True)
class FitResult:
    exponent_c: float
    stderr: float
    window: tuple[int, int]
    r_squared: float
    points_used: int
    intercept: float = 0.0


def _check(alpha: float, t: float) -> None:
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if not t >= 1.0:
        raise ValueError(f"t must be >= 1, got {t}")


def _power_ratio(t: float, p: float) -> float:
    """``(t**p - 1) / p`` with its ``p -> 0`` limit ``log t``."""
    if abs(p) < SINGULAR_TOL:
        return math.log(t)
    return math.expm1(p * math.log(t)) / p


def paper_truncated_moments(alpha: float, t: float) -> MomentPair:
    """Truncated waiting-time moments from the closed-form expressions.

    ``first = a/(a+1) * (1 + (t**(1-a) - 1)/(1-a))`` and
    ``second = a/(a+1) * (1/3 + (t**(2-a) - 1)/(2-a))``.  The constant 1 in
    ``first`` is kept on purpose; direct integration of the density gives 1/2
    (see :func:`numeric_truncated_moments`).
    """
    _check(alpha, t)
    scale = alpha / (alpha + 1.0)
    first = scale * (1.0 + _power_ratio(t, 1.0 - alpha))
    second = scale * (1.0 / 3.0 + _power_ratio(t, 2.0 - alpha))
    return MomentPair(first, second, float(t))


def numeric_truncated_moments(alpha: float, t: float) -> MomentPair:
    """``int_0^t x**k rho(x) dx`` for ``k = 1, 2`` by adaptive quadrature.

    The tail piece is integrated in ``s = log x`` so the integrand stays
    smooth over many decades of ``t``.
    """
    _check(alpha, t)
    scale = alpha / (alpha + 1.0)
    log_t = math.log(t)
    out = []
    for k in (1, 2):
        head, _ = integrate.quad(lambda x: x**k * scale, 0.0, min(t, 1.0), epsabs=0.0, epsrel=1e-12)
        tail = 0.0
        if log_t > 0.0:
            tail, _ = integrate.quad(
                lambda s: scale * math.exp((k - alpha) * s), 0.0, log_t,
                epsabs=0.0, epsrel=1e-12, limit=200,
            )
        out.append(head + tail)
    return MomentPair(out[0], out[1], float(t))


def analytic_exponent_finite(alpha: float, t: float, moments: str = "numeric") -> float:
    """Finite-horizon exponent ``(1 + log(<T^2>/<T>) / log t) / 2``."""
    if not t > 1.0:
        raise ValueError(f"t must be > 1, got {t}")
    if moments == "numeric":
        mp = numeric_truncated_moments(alpha, t)
    elif moments == "closed":
        mp = paper_truncated_moments(alpha, t)
    else:
        raise ValueError(f"moments must be 'numeric' or 'closed', got {moments!r}")
    return 0.5 * (1.0 + math.log(mp.second / mp.first) / math.log(t))


def analytic_exponent_asymptotic(alpha: float) -> float:
    """Long-time exponent: 1 for ``alpha <= 1``, ``(3 - alpha)/2`` for ``1 <= alpha <= 2``."""
    if not 0.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [0, 2], got {alpha}")
    if alpha <= 1.0:
        return 1.0
    return 0.5 * (3.0 - alpha)


def fit_power_law(series: Iterable[tuple[float, float]], window: tuple[float, float]) -> FitResult:
    """Least-squares slope of ``log sigma`` against ``log t`` inside ``window`` (inclusive)."""
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError(f"window must satisfy lo < hi, got {window}")
    pts = [(float(t), float(s)) for t, s in series if t_lo <= t <= t_hi]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points in window {window}, got {len(pts)}")
    t, sigma = np.array(pts).T
    if np.any(~(sigma > 0)):
        raise ValueError("sigma values in the fit window must be positive")
    res = stats.linregress(np.log(t), np.log(sigma))
    r2 = float(res.rvalue**2) if np.isfinite(res.rvalue) else 1.0
    return FitResult(
        exponent_c=float(res.slope),
        stderr=float(res.stderr),
        window=(int(t_lo), int(t_hi)),
        r_squared=min(max(r2, 0.0), 1.0),
        points_used=len(pts),
        intercept=float(res.intercept),
    )


def predicted_exponent(law, t_max: int | None = None) -> float | None:
    """Asymptotic exponent expected for a waiting-time law, if one is known."""
    if isinstance(law, Levy):
        return analytic_exponent_asymptotic(law.alpha)
    if isinstance(law, Fixed):
        return 1.0 if t_max is not None and law.period > t_max else 0.5
    if isinstance(law, GaussianBaseline):
        return 0.5
    return None
