"""Monte Carlo ensembles of measured quantum-walk trajectories.

A trajectory starts localized at site 0, draws an interval ``T`` from the
waiting-time law, evolves unitarily for ``T`` steps, collapses, and repeats
until the last checkpoint.  At a checkpoint that coincides with the end of a
segment the state is recorded just before the measurement.

Trajectory ``i`` draws all its randomness from counter streams keyed on
``(master_seed, i)``, so results do not depend on how trajectories are split
across blocks or workers.  Blocks are reduced in index order, which makes a
run bit-reproducible for a given ``block_size``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels, walk
from .streams import LANE_COLLAPSE, LANE_WAIT, CounterStream, check_seed
from .waiting import WaitingTimeLaw, kernel_params, sample_interval

DEFAULT_BLOCK = 1024
DEFAULT_CHECKPOINTS = 60


def log_checkpoints(t_max: int, count: int = DEFAULT_CHECKPOINTS) -> np.ndarray:
    """About ``count`` log-spaced integer times in ``[1, t_max]``, deduplicated."""
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    pts = np.round(np.logspace(0.0, math.log10(t_max), count)).astype(np.int64)
    return np.unique(np.clip(pts, 1, t_max))


def check_checkpoints(checkpoints: Sequence[int], t_max: int) -> np.ndarray:
    ck = np.asarray(checkpoints, dtype=np.int64)
    if ck.ndim != 1 or ck.size == 0:
        raise ValueError("checkpoints must be a nonempty list of times")
    if np.any(np.diff(ck) <= 0):
        raise ValueError("checkpoints must be strictly increasing")
    if ck[0] < 1 or ck[-1] > t_max:
        raise ValueError(f"checkpoints must lie in [1, t_max={t_max}]")
    return ck


@dataclass(frozen=True)
class SimConfig:
    law: WaitingTimeLaw
    theta: float = walk.DEFAULT_THETA
    initial_qubit: walk.Qubit = walk.SYMMETRIC_QUBIT
    trajectories: int = 1000
    t_max: int = 1000
    checkpoints: tuple = None
    master_seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta}")
        if not self.initial_qubit.is_normalized():
            raise ValueError("initial qubit must be normalized")
        if self.trajectories < 1:
            raise ValueError(f"trajectories must be >= 1, got {self.trajectories}")
        if self.t_max < 2:
            raise ValueError(f"t_max must be >= 2, got {self.t_max}")
        ck = log_checkpoints(self.t_max) if self.checkpoints is None else self.checkpoints
        ck = check_checkpoints(ck, self.t_max)
        object.__setattr__(self, "checkpoints", tuple(int(c) for c in ck))
        object.__setattr__(self, "master_seed", check_seed(self.master_seed))


@dataclass
class EnsembleAccumulator:
    """Per-checkpoint running sums over trajectories.

    ``sums`` rows follow ``_kernels.ROW_*``: m1, m2, sigma, sigma**2 and the
    cross terms m1**2, m2**2, m1*m2 used for standard errors.
    """

    checkpoints: np.ndarray
    count: np.ndarray = None
    sums: np.ndarray = None

    def __post_init__(self):
        self.checkpoints = np.asarray(self.checkpoints, dtype=np.int64)
        n = self.checkpoints.size
        if self.count is None:
            self.count = np.zeros(n, dtype=np.int64)
        if self.sums is None:
            self.sums = np.zeros((_kernels.N_ROWS, n))

    sum_m1 = property(lambda self: self.sums[_kernels.ROW_M1])
    sum_m2 = property(lambda self: self.sums[_kernels.ROW_M2])
    sum_sigma = property(lambda self: self.sums[_kernels.ROW_SIGMA])
    sum_sigma_sq = property(lambda self: self.sums[_kernels.ROW_SIGMA_SQ])

    def add(self, k: int, m1: float, m2: float, var: float) -> None:
        s = self.sums
        sigma = math.sqrt(var)
        s[_kernels.ROW_M1, k] += m1
        s[_kernels.ROW_M2, k] += m2
        s[_kernels.ROW_SIGMA, k] += sigma
        s[_kernels.ROW_SIGMA_SQ, k] += var
        s[_kernels.ROW_M1_SQ, k] += m1 * m1
        s[_kernels.ROW_M2_SQ, k] += m2 * m2
        s[_kernels.ROW_M1_M2, k] += m1 * m2
        self.count[k] += 1

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        if not np.array_equal(self.checkpoints, other.checkpoints):
            raise ValueError("cannot merge accumulators with different checkpoints")
        return EnsembleAccumulator(self.checkpoints, self.count + other.count, self.sums + other.sums)

    def stats(self) -> "EnsembleStats":
        return EnsembleStats.from_sums(self.checkpoints, self.count, self.sums)


@dataclass(frozen=True)
class EnsembleStats:
    """Ensemble summaries per checkpoint.

    ``mean_sigma`` averages each trajectory's own spread, ``rms_sigma`` is the
    root of the averaged variance, and ``ensemble_sigma`` is the spread of the
    pooled position distribution (what the master equation predicts).
    """

    time: np.ndarray
    count: np.ndarray
    mean_sigma: np.ndarray
    rms_sigma: np.ndarray
    ensemble_sigma: np.ndarray
    ensemble_sigma_stderr: np.ndarray
    mean_m1: np.ndarray
    mean_m1_stderr: np.ndarray

    @property
    def ensemble_var(self) -> np.ndarray:
        return self.ensemble_sigma**2

    @property
    def ensemble_var_stderr(self) -> np.ndarray:
        return 2.0 * self.ensemble_sigma * self.ensemble_sigma_stderr

    @classmethod
    def from_sums(cls, time, count, sums) -> "EnsembleStats":
        n = count.astype(np.float64)
        s = sums
        mu1 = s[_kernels.ROW_M1] / n
        mu2 = s[_kernels.ROW_M2] / n
        var = np.maximum(mu2 - mu1 * mu1, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            dof = n - 1.0
            v11 = np.maximum(s[_kernels.ROW_M1_SQ] - n * mu1 * mu1, 0.0) / dof
            v22 = np.maximum(s[_kernels.ROW_M2_SQ] - n * mu2 * mu2, 0.0) / dof
            c12 = (s[_kernels.ROW_M1_M2] - n * mu1 * mu2) / dof
            # delta method for mu2 - mu1**2
            var_of_var = np.maximum(v22 - 4.0 * mu1 * c12 + 4.0 * mu1 * mu1 * v11, 0.0) / n
            sigma = np.sqrt(var)
            sigma_se = np.where(sigma > 0, np.sqrt(var_of_var) / (2.0 * sigma), 0.0)
            sigma_se = np.where(n > 1, sigma_se, np.nan)
            m1_se = np.where(n > 1, np.sqrt(v11 / n), np.nan)
        return cls(
            time=np.asarray(time, dtype=np.int64),
            count=np.asarray(count, dtype=np.int64),
            mean_sigma=s[_kernels.ROW_SIGMA] / n,
            rms_sigma=np.sqrt(s[_kernels.ROW_SIGMA_SQ] / n),
            ensemble_sigma=sigma,
            ensemble_sigma_stderr=sigma_se,
            mean_m1=mu1,
            mean_m1_stderr=m1_se,
        )

    def rows(self):
        for i in range(self.time.size):
            yield (int(self.time[i]), float(self.mean_sigma[i]), float(self.rms_sigma[i]),
                   float(self.ensemble_sigma[i]), int(self.count[i]))


@dataclass
class TrajectorySummary:
    index: int
    records: list = field(default_factory=list)  # (t, m1, m2, var)
    collapses: list = field(default_factory=list)  # (t, CollapseOutcome)
    intervals: list = field(default_factory=list)


def run_trajectory(cfg: SimConfig, index: int = 0, sink: EnsembleAccumulator | None = None,
                   trace: Callable | None = None) -> TrajectorySummary:
    """Reference trajectory built step by step from the walk primitives.

    ``trace(t, state)`` is called after every step when given.
    """
    wait_rng = CounterStream(cfg.master_seed, index, LANE_WAIT)
    meas_rng = CounterStream(cfg.master_seed, index, LANE_COLLAPSE)
    summary = TrajectorySummary(index)
    ck = cfg.checkpoints
    state = walk.new_localized(0, cfg.initial_qubit)
    remaining = sample_interval(cfg.law, wait_rng)
    summary.intervals.append(remaining)
    k = 0
    for t in range(1, cfg.t_max + 1):
        state = walk.step(state, cfg.theta)
        remaining -= 1
        if trace is not None:
            trace(t, state)
        if t == ck[k]:
            m1, m2, var = walk.moments(state)
            summary.records.append((t, m1, m2, var))
            if sink is not None:
                sink.add(k, m1, m2, var)
            k += 1
            if k == len(ck):
                break
        if remaining == 0:
            state, outcome = walk.collapse_measure(state, meas_rng)
            summary.collapses.append((t, outcome))
            remaining = sample_interval(cfg.law, wait_rng)
            summary.intervals.append(remaining)
    return summary


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _call(job, start, stop):
    return job(start, stop)


def run_blocks(job, checkpoints: np.ndarray, trajectories: int, workers: int = 1,
               block_size: int = DEFAULT_BLOCK) -> EnsembleAccumulator:
    """Run ``job(start, stop)`` over trajectory blocks and reduce in block order."""
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    starts = list(range(0, trajectories, block_size))
    stops = [min(s + block_size, trajectories) for s in starts]
    if workers > 1 and len(starts) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_call, [job] * len(starts), starts, stops))
    else:
        parts = [job(a, b) for a, b in zip(starts, stops)]
    acc = EnsembleAccumulator(checkpoints)
    for (a, b), part in zip(zip(starts, stops), parts):
        acc = acc.merge(EnsembleAccumulator(checkpoints, np.full(checkpoints.size, b - a), part))
    return acc


@dataclass(frozen=True)
class _WavefunctionJob:
    seed: int
    law: tuple
    theta: float
    qubit: walk.Qubit
    checkpoints: np.ndarray

    def __call__(self, start: int, stop: int) -> np.ndarray:
        out = np.zeros((_kernels.N_ROWS, self.checkpoints.size))
        kind, p1, p2, redraw = self.law
        _kernels.wavefunction_block(
            np.uint64(self.seed), start, stop, LANE_WAIT, LANE_COLLAPSE, kind, p1, p2, redraw,
            math.cos(self.theta), math.sin(self.theta),
            complex(self.qubit.left), complex(self.qubit.right), self.checkpoints, out,
        )
        return out


def accumulate_ensemble(cfg: SimConfig, workers: int = 1, block_size: int = DEFAULT_BLOCK,
                        compiled: bool = True) -> EnsembleAccumulator:
    ck = np.asarray(cfg.checkpoints, dtype=np.int64)
    if not compiled:
        acc = EnsembleAccumulator(ck)
        for i in range(cfg.trajectories):
            run_trajectory(cfg, i, acc)
        return acc
    job = _WavefunctionJob(cfg.master_seed, kernel_params(cfg.law), cfg.theta, cfg.initial_qubit, ck)
    return run_blocks(job, ck, cfg.trajectories, workers, block_size)


def run_ensemble(cfg: SimConfig, workers: int = 1, block_size: int = DEFAULT_BLOCK,
                 compiled: bool = True) -> EnsembleStats:
    return accumulate_ensemble(cfg, workers, block_size, compiled).stats()
