"""Optimal times for distributed and sampled-data controls.

Both are obtained by inverting the minimal-norm maps: T(M) solves N(T) = M on
(0, T*) where N is strictly decreasing, and T_delta(M) is k d for the smallest
admissible k with N_delta(k d) <= M.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .gramians import SamplingGrid
from .minnorm import solve_jp_continuous, solve_jp_sampled
from .spectral import as_state, exit_time

log = logging.getLogger(__name__)

TIME_TOL = 1e-13


@dataclass(frozen=True)
class TimeSolution:
    optimal_time: float
    budget: float
    control: object = field(repr=False)
    kind: str = "distributed"
    delta: float = None
    blocks: int = None
    exit_time: float = None
    norm_solution: object = field(default=None, repr=False)
    sandwich: tuple = None
    warnings: tuple = ()


def norm_at(d, y0, target, T, t_exit=None):
    """N(T, y0), taken as 0 once the free flow already reaches the ball."""
    if t_exit is not None and T >= t_exit:
        return 0.0
    try:
        return solve_jp_continuous(d, y0, target, T).norm
    except PreconditionError:
        return 0.0


def sampled_norm_at(d, y0, target, delta, k, t_exit):
    return solve_jp_sampled(d, y0, target, SamplingGrid(delta, k), t_exit=t_exit).norm


def optimal_time_distributed(d, y0, target, M, tol=TIME_TOL):
    """T(M, y0) by bisection on the strictly decreasing map T -> N(T, y0)."""
    if not (M >= 0 and np.isfinite(M)):
        raise DomainError(f"budget must be nonnegative, got {M}")
    y0 = as_state(d, y0)
    t_exit = exit_time(d, y0, target)
    if M == 0:
        return TimeSolution(t_exit, 0.0, None, exit_time=t_exit)

    lo = 0.5 * t_exit
    while norm_at(d, y0, target, lo, t_exit) <= M:
        lo *= 0.5
        if lo < 1e-300:
            raise DomainError("budget too large to bracket the optimal time")
    hi = t_exit
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if norm_at(d, y0, target, mid, t_exit) > M:
            lo = mid
        else:
            hi = mid
    T = 0.5 * (lo + hi)
    sol = solve_jp_continuous(d, y0, target, T)
    return TimeSolution(T, float(M), sol.control, exit_time=t_exit, norm_solution=sol)


def optimal_time_sampled(d, y0, target, M, delta, k_hint=None):
    """T_delta(M, y0) = k d for the smallest k >= 2 with N_delta(k d) <= M.

    The search only visits k with k d < T* (the well-posed regime). Since
    N_delta(k d) is nonincreasing in k a bisection over integers is used.
    """
    if not (M > 0 and np.isfinite(M)):
        raise DomainError(f"budget must be positive, got {M}")
    if not delta > 0:
        raise DomainError(f"sampling period must be positive, got {delta}")
    y0 = as_state(d, y0)
    t_exit = exit_time(d, y0, target)
    k_max = math.ceil(t_exit / delta) - 1
    while k_max * delta >= t_exit:
        k_max -= 1
    if k_max < 2:
        raise PreconditionError(f"sampling too coarse: delta = {delta} leaves no k >= 2 with k d < {t_exit}")

    cache = {}

    def solve(k):
        if k not in cache:
            cache[k] = solve_jp_sampled(d, y0, target, SamplingGrid(delta, k), t_exit=t_exit)
        return cache[k]

    def ok(k):
        return solve(k).norm <= M

    if not ok(k_max):
        raise PreconditionError(
            f"sampling too coarse: N_delta(k d) > M = {M} for every admissible k (delta = {delta})"
        )
    lo, hi = 1, k_max  # ok(hi) holds; lo is a virtual failing index
    if k_hint is not None and 2 <= k_hint <= k_max:
        if ok(k_hint):
            hi = k_hint
            probe = k_hint - 1
            if probe >= 2 and not ok(probe):
                lo = probe
        else:
            lo = k_hint
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid < 2:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    k = hi
    sol = solve(k)
    warnings = []
    sandwich = None
    if k == 2:
        warnings.append("k = 2 boundary: whether k = 1 already suffices is not tested")
        log.warning("optimal sampled time at k = 2 for delta = %g; k = 1 is untestable", delta)
    else:
        below = solve(k - 1).norm
        sandwich = (M - sol.norm, below - M)
        if not (sol.norm <= M < below):
            raise PreconditionError(f"sandwich violated at k={k}: {sol.norm} <= {M} < {below}")
    return TimeSolution(
        k * delta,
        float(M),
        sol.control,
        kind="sampled",
        delta=float(delta),
        blocks=k,
        exit_time=t_exit,
        norm_solution=sol,
        sandwich=sandwich,
        warnings=tuple(warnings),
    )


def time_lipschitz_check(d, y1, y2, target, M):
    """(|T(M,y1) - T(M,y2)|, ||y1 - y2|| / (lambda_1 r))."""
    t1 = optimal_time_distributed(d, y1, target, M).optimal_time
    t2 = optimal_time_distributed(d, y2, target, M).optimal_time
    bound = np.linalg.norm(as_state(d, y1) - as_state(d, y2)) / (d.lambda1 * target.radius)
    return abs(t1 - t2), float(bound)


def norm_lipschitz_check(d, y0, target, T1, T2):
    """(lambda_1^{3/2} r (T2 - T1), N(T1) - N(T2), difference quotient)."""
    if not (0 < T1 < T2):
        raise DomainError(f"need 0 < T1 < T2, got T1={T1}, T2={T2}")
    t_exit = exit_time(d, y0, target)
    if T2 >= t_exit:
        raise DomainError(f"T2 = {T2} must stay below the exit time {t_exit}")
    n1 = solve_jp_continuous(d, y0, target, T1).norm
    n2 = solve_jp_continuous(d, y0, target, T2).norm
    lower = d.lambda1 ** 1.5 * target.radius * (T2 - T1)
    return float(lower), n1 - n2, (n1 - n2) / (T2 - T1)
