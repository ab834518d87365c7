"""Compiled inner loops.

Everything here is scalar or loop code meant to be called from the public
modules; the readable reference versions live next to their contracts
(``walk``, ``waiting``, ``streams``, ``oracle``) and the test-suite checks the
two against each other.
"""

import math

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
LANE_MULT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0

LAW_LEVY = 0
LAW_FIXED = 1
LAW_GAUSS = 2

# Intervals longer than this are never observable and would overflow int64 sums.
INTERVAL_CAP = 2**62

# Rows of the accumulator block returned by the ensemble kernels.
ROW_M1, ROW_M2, ROW_SIGMA, ROW_SIGMA_SQ, ROW_M1_SQ, ROW_M2_SQ, ROW_M1_M2 = range(7)
N_ROWS = 7

SQRT_HALF = 1.0 / math.sqrt(2.0)


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, index, lane):
    k = mix64(np.uint64(seed) + GOLDEN)
    k = mix64(k ^ ((np.uint64(index) + np.uint64(1)) * GOLDEN))
    return mix64(k + np.uint64(lane) * LANE_MULT)


@njit(cache=True, inline="always")
def uniform(key, counter):
    z = mix64(key + (np.uint64(counter) + np.uint64(1)) * GOLDEN)
    return float(z >> _S11) * _INV_2_53


@njit(cache=True)
def fill_uniforms(key, start, out):
    for i in range(out.size):
        out[i] = uniform(key, start + i)


@njit(cache=True, inline="always")
def levy_quantile(alpha, u):
    knee = alpha / (1.0 + alpha)
    if u < knee:
        return u * (1.0 + alpha) / alpha
    return ((1.0 + alpha) * (1.0 - u)) ** (-1.0 / alpha)


@njit(cache=True, inline="always")
def _to_interval(x):
    if not x < INTERVAL_CAP:
        return INTERVAL_CAP
    n = np.int64(math.floor(x))
    return n if n >= 1 else np.int64(1)


@njit(cache=True)
def unit_threshold(kind, p1, redraw):
    """Uniforms below this value certainly give ``T = 1`` (skips the power)."""
    if kind != LAW_LEVY:
        return -1.0
    knee = p1 / (1.0 + p1)
    below_two = 1.0 - 2.0 ** (-p1) / (1.0 + p1)
    if redraw:
        below_two = (below_two - knee) / (1.0 - knee)
    return below_two - 1e-9


@njit(cache=True, inline="always")
def draw_interval(kind, p1, p2, redraw, u1, u2, unit_below=-1.0):
    if kind == LAW_FIXED:
        return np.int64(p1)
    if kind == LAW_LEVY:
        if u1 < unit_below:
            return np.int64(1)
        if redraw:
            # conditioning on t >= 1: same law as rejecting draws below the knee
            knee = p1 / (1.0 + p1)
            u1 = knee + u1 * (1.0 - knee)
        return _to_interval(levy_quantile(p1, u1))
    z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
    return _to_interval(math.floor(p1 + p2 * z + 0.5))


@njit(cache=True, inline="always")
def uniforms_per_interval(kind):
    if kind == LAW_FIXED:
        return 0
    if kind == LAW_LEVY:
        return 1
    return 2


@njit(cache=True, inline="always")
def next_interval(key, counter, kind, p1, p2, redraw, unit_below):
    n = uniforms_per_interval(kind)
    u1 = uniform(key, counter) if n >= 1 else 0.0
    u2 = uniform(key, counter + 1) if n >= 2 else 0.0
    return draw_interval(kind, p1, p2, redraw, u1, u2, unit_below), counter + n


@njit(cache=True)
def draw_intervals(key, kind, p1, p2, redraw, out):
    unit_below = unit_threshold(kind, p1, redraw)
    counter = 0
    for i in range(out.size):
        out[i], counter = next_interval(key, counter, kind, p1, p2, redraw, unit_below)


@njit(cache=True)
def _record(out, k, m1, m2, var):
    sigma = math.sqrt(var)
    out[ROW_M1, k] += m1
    out[ROW_M2, k] += m2
    out[ROW_SIGMA, k] += sigma
    out[ROW_SIGMA_SQ, k] += var
    out[ROW_M1_SQ, k] += m1 * m1
    out[ROW_M2_SQ, k] += m2 * m2
    out[ROW_M1_M2, k] += m1 * m2


@njit(cache=True, inline="always")
def _prob(A, B, row, j):
    return A[row, j].real ** 2 + A[row, j].imag ** 2 + B[row, j].real ** 2 + B[row, j].imag ** 2


@njit(cache=True)
def wavefunction_block(seed, start, stop, lane_wait, lane_collapse, kind, p1, p2, redraw,
                       cos_t, sin_t, qa, qb, checkpoints, out):
    """Full wavefunction trajectories ``start..stop-1`` accumulated into ``out``.

    Amplitudes are kept relative to the last collapse site in buffers centred
    on ``center``; ``elapsed`` bounds the live window.
    """
    nck = checkpoints.size
    unit_below = unit_threshold(kind, p1, redraw)
    t_max = checkpoints[nck - 1]
    width = 2 * t_max + 5
    center = t_max + 2
    # row ``cur`` holds the live amplitudes, row ``1 - cur`` is scratch
    A = np.zeros((2, width), dtype=np.complex128)
    B = np.zeros((2, width), dtype=np.complex128)
    cur = 0
    elapsed = 0
    for idx in range(start, stop):
        for j in range(center - elapsed - 2, center + elapsed + 3):
            A[0, j] = 0.0
            A[1, j] = 0.0
            B[0, j] = 0.0
            B[1, j] = 0.0
        kw = stream_key(seed, idx, lane_wait)
        kc = stream_key(seed, idx, lane_collapse)
        cw = 0
        cc = 0
        A[cur, center] = qa
        B[cur, center] = qb
        site = 0
        elapsed = 0
        remaining, cw = next_interval(kw, cw, kind, p1, p2, redraw, unit_below)
        k = 0
        for t in range(1, t_max + 1):
            lo = center - elapsed - 1
            hi = center + elapsed + 1
            nxt = 1 - cur
            for j in range(lo, hi + 1):
                A[nxt, j] = A[cur, j + 1] * cos_t + B[cur, j + 1] * sin_t
                B[nxt, j] = A[cur, j - 1] * sin_t - B[cur, j - 1] * cos_t
            cur = nxt
            elapsed += 1
            remaining -= 1
            if t == checkpoints[k]:
                mj = 0.0
                mjj = 0.0
                for j in range(lo, hi + 1):
                    p = _prob(A, B, cur, j)
                    x = float(j - lo)
                    mj += x * p
                    mjj += x * x * p
                var = mjj - mj * mj
                if var < 0.0:
                    var = 0.0
                m1 = site + (lo - center) + mj
                _record(out, k, m1, var + m1 * m1, var)
                k += 1
                if k == nck:
                    break
            if remaining == 0:
                total = 0.0
                for j in range(lo, hi + 1):
                    total += _prob(A, B, cur, j)
                u_site = uniform(kc, cc)
                u_sign = uniform(kc, cc + 1)
                cc += 2
                target = u_site * total
                cum = 0.0
                pick = hi
                for j in range(lo, hi + 1):
                    cum += _prob(A, B, cur, j)
                    if cum > target:
                        pick = j
                        break
                while _prob(A, B, cur, pick) == 0.0:
                    pick -= 1
                ps = _prob(A, B, cur, pick)
                proj = A[cur, pick] - 1j * B[cur, pick]
                p_plus = (proj.real ** 2 + proj.imag ** 2) / (2.0 * ps)
                sign = 1.0 if u_sign < p_plus else -1.0
                for j in range(lo - 1, hi + 2):
                    A[0, j] = 0.0
                    A[1, j] = 0.0
                    B[0, j] = 0.0
                    B[1, j] = 0.0
                site += pick - center
                A[cur, center] = SQRT_HALF
                B[cur, center] = 1j * sign * SQRT_HALF
                elapsed = 0
                remaining, cw = next_interval(kw, cw, kind, p1, p2, redraw, unit_below)


@njit(cache=True)
def recurrence_block(seed, start, stop, lane_wait, kind, p1, p2, redraw,
                     var_tab, m1_tab, var_first, m1_first, checkpoints, out):
    """Variance-recurrence trajectories ``start..stop-1`` accumulated into ``out``.

    Per trajectory the master-equation distribution conditioned on the drawn
    intervals has mean ``M`` and variance ``V``; records are ``m1 = M``,
    ``m2 = V + M**2`` and ``sigma = sqrt(V)``.  The first segment uses the
    ``*_first`` tables (initial qubit), later ones the post-collapse tables.
    """
    nck = checkpoints.size
    unit_below = unit_threshold(kind, p1, redraw)
    for idx in range(start, stop):
        kw = stream_key(seed, idx, lane_wait)
        T, cw = next_interval(kw, 0, kind, p1, p2, redraw, unit_below)
        k = 0
        while k < nck and checkpoints[k] <= T:
            e = checkpoints[k]
            _record(out, k, m1_first[e], var_first[e] + m1_first[e] ** 2, var_first[e])
            k += 1
        if k == nck:
            continue
        t = T
        acc_v = var_first[T]
        acc_m = m1_first[T]
        while True:
            T, cw = next_interval(kw, cw, kind, p1, p2, redraw, unit_below)
            end = t + T
            while k < nck and checkpoints[k] <= end:
                e = checkpoints[k] - t
                v = acc_v + var_tab[e]
                m = acc_m + m1_tab[e]
                _record(out, k, m, v + m * m, v)
                k += 1
            if k == nck:
                break
            acc_v += var_tab[T]
            acc_m += m1_tab[T]
            t = end
