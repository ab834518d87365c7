"""Spinor wavefunction of a discrete-time quantum walk on the line.

The walker lives on integer sites ``n`` with a two-component chirality
amplitude ``(a_n, b_n)`` (upper = left, lower = right).  A step applies the
coin ``K(theta) = sigma_z exp(-i theta sigma_y)`` followed by the
chirality-conditioned shift, which in components reads::

    a_n(t+1) = a_{n+1}(t) cos(theta) + b_{n+1}(t) sin(theta)
    b_n(t+1) = a_{n-1}(t) sin(theta) - b_{n-1}(t) cos(theta)

States are stored as a dense window ``[origin, origin + len(a))`` in absolute
lattice coordinates, so the collapse history is carried along with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT_HALF = 1.0 / math.sqrt(2.0)
DEFAULT_THETA = math.pi / 4
NORM_TOL = 1e-12


@dataclass(frozen=True)
class Qubit:
    """Chirality amplitudes ``(left, right)``."""

    left: complex
    right: complex

    @property
    def norm_sq(self) -> float:
        return abs(self.left) ** 2 + abs(self.right) ** 2

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_sq - 1.0) <= tol

    @classmethod
    def sigma_y_eigenstate(cls, sign: int) -> "Qubit":
        """Return ``(1, i*sign)/sqrt(2)``, the sigma_y eigenstate with eigenvalue ``sign``."""
        if sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {sign!r}")
        return cls(complex(SQRT_HALF, 0.0), complex(0.0, sign * SQRT_HALF))


SYMMETRIC_QUBIT = Qubit.sigma_y_eigenstate(+1)


@dataclass
class WalkerState:
    origin: int
    a: np.ndarray
    b: np.ndarray
    time: int = 0

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.origin, self.origin + self.a.size)

    def probabilities(self) -> np.ndarray:
        """Site probabilities over the stored window."""
        return self.a.real**2 + self.a.imag**2 + self.b.real**2 + self.b.imag**2

    def norm(self) -> float:
        return float(self.probabilities().sum())

    def copy(self) -> "WalkerState":
        return WalkerState(self.origin, self.a.copy(), self.b.copy(), self.time)


@dataclass(frozen=True)
class CollapseOutcome:
    site: int
    chirality_sign: int
    probability: float


def new_localized(site: int, qubit: Qubit, time: int = 0) -> WalkerState:
    if not qubit.is_normalized():
        raise ValueError(f"qubit must be normalized, |left|^2+|right|^2 = {qubit.norm_sq!r}")
    a = np.array([qubit.left], dtype=np.complex128)
    b = np.array([qubit.right], dtype=np.complex128)
    return WalkerState(int(site), a, b, int(time))


def step(state: WalkerState, theta: float = DEFAULT_THETA) -> WalkerState:
    """Apply one coin+shift step.  The window grows by one site on each side."""
    c, s = math.cos(theta), math.sin(theta)
    size = state.a.size
    a = np.zeros(size + 2, dtype=np.complex128)
    b = np.zeros(size + 2, dtype=np.complex128)
    # new window starts at origin - 1; old site j maps to new index j - origin + 1
    a[:size] = state.a * c + state.b * s
    b[2:] = state.a * s - state.b * c
    return WalkerState(state.origin - 1, a, b, state.time + 1)


def evolve(state: WalkerState, theta: float = DEFAULT_THETA, steps: int = 1) -> WalkerState:
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    for _ in range(steps):
        state = step(state, theta)
    return state


def position_distribution(state: WalkerState) -> dict[int, float]:
    """Map of site -> probability over sites with nonzero weight."""
    p = state.probabilities()
    return {int(n): float(pn) for n, pn in zip(state.sites, p) if pn > 0.0}


def moments(state: WalkerState) -> tuple[float, float, float]:
    """First moment, second moment and variance of the position in absolute coordinates."""
    p = state.probabilities()
    # offsets relative to origin keep the products small; shift back afterwards
    j = np.arange(p.size, dtype=np.float64)
    mj = float(np.dot(j, p))
    mjj = float(np.dot(j * j, p))
    var = max(mjj - mj * mj, 0.0)
    m1 = state.origin + mj
    m2 = var + m1 * m1
    return m1, m2, var


def collapse_measure(state: WalkerState, rng) -> tuple[WalkerState, CollapseOutcome]:
    """Projectively measure position and sigma_y chirality.

    ``rng`` needs a ``random()`` method returning floats in ``[0, 1)``; exactly
    two draws are consumed (site, then chirality sign).  The returned state is
    localized on the measured site in the exact eigenstate ``(1, i*sign)/sqrt(2)``
    and keeps the global time.
    """
    p = state.probabilities()
    cum = np.cumsum(p)
    total = cum[-1]
    if not total > 0.0:
        raise RuntimeError("cannot measure a state with zero norm")
    u_site = rng.random()
    u_sign = rng.random()
    j = int(np.searchsorted(cum, u_site * total, side="right"))
    j = min(j, p.size - 1)
    while p[j] == 0.0:  # only reachable through rounding at the top end
        j -= 1
    p_site = p[j]
    proj = state.a[j] - 1j * state.b[j]
    p_plus = min((proj.real**2 + proj.imag**2) / (2.0 * p_site), 1.0)
    if u_sign < p_plus:
        sign, p_sign = 1, p_plus
    else:
        sign, p_sign = -1, 1.0 - p_plus
    site = state.origin + j
    outcome = CollapseOutcome(site, sign, float(p_site / total * p_sign))
    return new_localized(site, Qubit.sigma_y_eigenstate(sign), state.time), outcome
