"""Discrete-time quantum walk with measurements at Levy-distributed waiting times."""

from .walk import (
    DEFAULT_THETA,
    SYMMETRIC_QUBIT,
    CollapseOutcome,
    Qubit,
    WalkerState,
    collapse_measure,
    evolve,
    moments,
    new_localized,
    position_distribution,
    step,
)
from .waiting import Fixed, GaussianBaseline, Levy, levy_cdf, levy_inverse_cdf, sample_interval
from .engine import EnsembleAccumulator, EnsembleStats, SimConfig, run_ensemble, run_trajectory
from .oracle import (
    Kernel,
    SigmaQTable,
    build_kernel,
    build_sigma_q_table,
    convolve_master,
    estimate_k,
    oracle_ensemble,
    recurrence_trajectory,
)

__version__ = "0.1.0"
