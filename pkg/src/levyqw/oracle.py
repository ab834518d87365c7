"""Semi-analytic ensemble engine built on the variance recurrence.

Between two measurements the walker evolves freely for ``T`` steps and the
measured displacement has the law ``q(T)`` of a fresh walk.  Because a
collapse leaves a sigma_y eigenstate and both eigenstates generate the same
``q(T)``, positions follow a random walk with increments ``q(T_i)`` and

    var(t + T) = var(t) + var_q(T).

Tabulating ``var_q(T)`` once lets whole trajectories be summarized from their
interval sequences alone, without evolving any wavefunction.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels, walk
from .engine import (
    DEFAULT_BLOCK,
    EnsembleAccumulator,
    EnsembleStats,
    check_checkpoints,
    run_blocks,
)
from .streams import LANE_WAIT, CounterStream, check_seed
from .waiting import WaitingTimeLaw, kernel_params, sample_interval


@dataclass(frozen=True)
class Kernel:
    """Displacement law after ``T`` free steps; ``q[i]`` is offset ``i - T``."""

    T: int
    q: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.T, self.T + 1)

    def as_dict(self) -> dict[int, float]:
        return {int(n): float(p) for n, p in zip(self.offsets, self.q) if p > 0.0}

    def mean(self) -> float:
        return float(np.dot(self.offsets, self.q))

    def second_moment(self) -> float:
        n = self.offsets.astype(np.float64)
        return float(np.dot(n * n, self.q))

    def variance(self) -> float:
        m = self.mean()
        return self.second_moment() - m * m


@dataclass(frozen=True)
class Distribution:
    """Position distribution on ``origin, origin+1, ...``."""

    origin: int
    p: np.ndarray

    @classmethod
    def from_dict(cls, probs: dict[int, float]) -> "Distribution":
        lo, hi = min(probs), max(probs)
        p = np.zeros(hi - lo + 1)
        for n, pn in probs.items():
            p[n - lo] = pn
        return cls(lo, p)

    @classmethod
    def delta(cls, site: int = 0) -> "Distribution":
        return cls(site, np.ones(1))

    def as_dict(self) -> dict[int, float]:
        return {self.origin + i: float(x) for i, x in enumerate(self.p) if x > 0.0}

    def moments(self) -> tuple[float, float]:
        n = np.arange(self.origin, self.origin + self.p.size, dtype=np.float64)
        return float(np.dot(n, self.p)), float(np.dot(n * n, self.p))


@dataclass(frozen=True)
class SigmaQTable:
    theta: float
    qubit: walk.Qubit
    values: np.ndarray
    m1q: np.ndarray

    @property
    def t_max(self) -> int:
        return self.values.size - 1

    def ratio(self) -> np.ndarray:
        """``values[T] / T**2`` with ``nan`` at ``T = 0``."""
        T = np.arange(self.values.size, dtype=np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.values / (T * T)


def build_kernel(theta: float, qubit: walk.Qubit, T: int) -> Kernel:
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    state = walk.evolve(walk.new_localized(0, qubit), theta, T)
    # the window after T steps is exactly [-T, T]
    return Kernel(int(T), state.probabilities())


def build_sigma_q_table(theta: float, qubit: walk.Qubit, t_max: int) -> SigmaQTable:
    """Free-walk variances for ``T = 0..t_max`` from one incremental evolution.

    Tables are cached per ``(theta, qubit, t_max)`` and returned read-only.
    """
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    return _cached_table(float(theta), qubit, int(t_max))


@functools.lru_cache(maxsize=16)
def _cached_table(theta: float, qubit: walk.Qubit, t_max: int) -> SigmaQTable:
    values = np.zeros(t_max + 1)
    m1q = np.zeros(t_max + 1)
    state = walk.new_localized(0, qubit)
    for T in range(1, t_max + 1):
        state = walk.step(state, theta)
        m1, _, var = walk.moments(state)
        values[T] = var
        m1q[T] = m1
    values.flags.writeable = False
    m1q.flags.writeable = False
    return SigmaQTable(float(theta), qubit, values, m1q)


def estimate_k(table: SigmaQTable) -> tuple[float, float]:
    """Quadratic coefficient of ``var_q(T) ~ k T**2`` and an uncertainty.

    Uses the ratios ``values[T]/T**2`` at the three largest powers of two in
    the table, extrapolated with Aitken's delta-squared.  The uncertainty is
    the size of the extrapolation step plus the spread of the last two ratios.
    """
    if table.t_max < 256:
        raise ValueError(f"table must reach T >= 256, got T_max = {table.t_max}")
    top = int(math.floor(math.log2(table.t_max)))
    r = [table.values[2**e] / float(4**e) for e in (top - 2, top - 1, top)]
    d1, d2 = r[1] - r[0], r[2] - r[1]
    denom = d2 - d1
    if denom == 0.0 or abs(d2) >= abs(d1):
        k = r[2]
    else:
        k = r[2] - d2 * d2 / denom
    return float(k), float(abs(k - r[2]) + abs(d2))


def convolve_master(P: Distribution, kernel: Kernel) -> Distribution:
    """One measurement cycle of the master equation: ``P'(n) = sum_j q(n-j) P(j)``."""
    return Distribution(P.origin - kernel.T, np.convolve(P.p, kernel.q))


def recurrence_trajectory(
    T_sequence: Sequence[int],
    table: SigmaQTable,
    checkpoints: Sequence[int],
    first_table: SigmaQTable | None = None,
) -> np.ndarray:
    """Master-equation variance at each checkpoint for a given interval sequence.

    Completed segments contribute ``var_q(T_i)``; a checkpoint inside a
    segment adds ``var_q`` of the steps elapsed since the last measurement.
    ``first_table`` covers the segment before the first measurement when the
    initial qubit is not a sigma_y eigenstate.  Checkpoints past the end of
    the sequence are treated as an open final segment.
    """
    checkpoints = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    tab = first_table if first_table is not None else table
    out = np.empty(len(checkpoints))
    t, acc, k = 0, 0.0, 0
    seq = iter(T_sequence)
    while k < len(checkpoints):
        T = next(seq, None)
        end = math.inf if T is None else t + int(T)
        while k < len(checkpoints) and checkpoints[k] <= end:
            e = checkpoints[k] - t
            if e > tab.t_max:
                raise ValueError(f"elapsed time {e} exceeds table T_max = {tab.t_max}")
            out[k] = acc + tab.values[e]
            k += 1
        if k == len(checkpoints):
            break
        if T > tab.t_max:
            raise ValueError(f"interval {T} exceeds table T_max = {tab.t_max}")
        acc += tab.values[T]
        t = end
        tab = table
    return out


def interval_sequence(law: WaitingTimeLaw, master_seed: int, index: int, horizon: int) -> list[int]:
    """Intervals drawn by trajectory ``index`` until they cover ``horizon`` steps."""
    rng = CounterStream(master_seed, index, LANE_WAIT)
    seq, total = [], 0
    while total < horizon:
        T = sample_interval(law, rng)
        seq.append(T)
        total += T
    return seq


def oracle_ensemble(
    law: WaitingTimeLaw,
    table: SigmaQTable,
    trajectories: int,
    t_max: int,
    checkpoints: Sequence[int],
    master_seed: int,
    *,
    first_table: SigmaQTable | None = None,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK,
) -> EnsembleStats:
    return oracle_accumulate(
        law, table, trajectories, t_max, checkpoints, master_seed,
        first_table=first_table, workers=workers, block_size=block_size,
    ).stats()


def oracle_accumulate(
    law, table, trajectories, t_max, checkpoints, master_seed, *,
    first_table=None, workers=1, block_size=DEFAULT_BLOCK,
) -> EnsembleAccumulator:
    if trajectories < 1:
        raise ValueError(f"trajectories must be >= 1, got {trajectories}")
    ck = check_checkpoints(checkpoints, t_max)
    first = first_table if first_table is not None else table
    for tab in (table, first):
        if tab.t_max < ck[-1]:
            raise ValueError(f"table T_max = {tab.t_max} is shorter than the last checkpoint {ck[-1]}")
    job = _RecurrenceJob(
        check_seed(master_seed), kernel_params(law),
        table.values, table.m1q, first.values, first.m1q, ck,
    )
    return run_blocks(job, ck, trajectories, workers, block_size)


@dataclass(frozen=True)
class _RecurrenceJob:
    seed: int
    law: tuple
    var_tab: np.ndarray
    m1_tab: np.ndarray
    var_first: np.ndarray
    m1_first: np.ndarray
    checkpoints: np.ndarray

    def __call__(self, start: int, stop: int) -> np.ndarray:
        out = np.zeros((_kernels.N_ROWS, self.checkpoints.size))
        kind, p1, p2, redraw = self.law
        _kernels.recurrence_block(
            np.uint64(self.seed), start, stop, LANE_WAIT, kind, p1, p2, redraw,
            self.var_tab, self.m1_tab, self.var_first, self.m1_first, self.checkpoints, out,
        )
        return out
