"""Experiments on the sampling-period dependence of optimal times and controls.

Everything here is built from the solvers in :mod:`heatctl.minnorm` and
:mod:`heatctl.timeopt`. Quantities that only exist as unspecified constants
(cut-off periods, prefactors) are measured, never assumed.
"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats
from scipy.special import digamma

from . import _kernels
from .errors import ConfigurationError, ConstructionError, HeatCtlError, PreconditionError
from .gramians import SamplingGrid
from .minnorm import SampledControl, solve_jp_continuous, solve_jp_sampled
from .spectral import as_state, exit_time
from .timeopt import optimal_time_distributed, optimal_time_sampled

log = logging.getLogger(__name__)


@dataclass
class SweepRow:
    delta: float
    T_gap: Optional[float] = None
    ctrl_err_min_norm: Optional[float] = None
    norm_gap: Optional[float] = None
    family_err: Optional[float] = None
    in_A: bool = False
    k: Optional[int] = None
    beta_max: Optional[float] = None
    z_h1: Optional[float] = None
    error: Optional[str] = None

    def as_dict(self):
        return asdict(self)


@dataclass
class EtaSet:
    """Union of the intervals (T/(k+eta), T/k) cut at ``cutoff``; T = T(M, y0)."""

    M: float
    eta: float
    optimal_time: float
    k_values: tuple
    cutoff: float
    samples: list = field(default_factory=list, repr=False)

    @property
    def intervals(self):
        T = self.optimal_time
        return [(T / (k + self.eta), T / k) for k in self.k_values]

    def contains(self, delta):
        if not 0 < delta < self.cutoff:
            return False
        k = math.floor(self.optimal_time / delta)
        if k < 1:
            return False
        frac = self.optimal_time / delta - k
        return 0.0 < frac < self.eta

    def offset(self, delta):
        """The a in (k + a) delta = T."""
        t = self.optimal_time / delta
        return t - math.floor(t)

    def measure_below(self, h):
        """Lebesgue measure of B intersected with (0, h), from the interval endpoints."""
        T, eta = self.optimal_time, self.eta
        k0 = max(1, math.ceil(T / h))  # intervals with T/k <= h lie wholly below h
        total = T * float(digamma(k0 + eta) - digamma(k0))
        # partial interval (T/(k+eta), T/k) straddling h
        kp = k0 - 1
        if kp >= 1:
            lo, hi = T / (kp + eta), T / kp
            total += max(0.0, min(h, hi) - lo)
        return total

    def density(self, h):
        return self.measure_below(h) / h

    def sample_point(self, k, a=None):
        a = 0.5 * self.eta if a is None else a
        return self.optimal_time / (k + a)


class FamilyResult(NamedTuple):
    members: list
    diameter_lower_bound: float
    details: dict


def _h1_norm(d, z):
    return float(np.sqrt(np.sum(d.lambdas * z * z)))


def control_distance(sampled, adjoint, t_end):
    """||sampled - adjoint||_{L2(0, t_end)} by per-block exponential antiderivatives.

    The adjoint control vanishes after its horizon.
    """
    dom = sampled.domain
    tail = 0.0
    if t_end > adjoint.horizon:
        tail = sampled.norm(t_end) ** 2 - sampled.norm(adjoint.horizon) ** 2
        t_end = adjoint.horizon
    sq = tail + _kernels.sampled_adjoint_distance_sq(
        dom.lambdas,
        np.ascontiguousarray(dom.gram),
        sampled.generators,
        float(sampled.grid.delta),
        np.ascontiguousarray(adjoint.generator),
        float(adjoint.horizon),
        float(t_end),
    )
    return float(np.sqrt(max(sq, 0.0)))


def control_distance_quadrature(sampled, adjoint, t_end, nodes_per_block=8):
    """Composite Gauss-Legendre evaluation of the same distance (oracle)."""
    dom = sampled.domain
    x, w = np.polynomial.legendre.leggauss(nodes_per_block)
    total = 0.0
    delta = sampled.grid.delta
    for i in range(sampled.grid.blocks):
        t0 = i * delta
        if t0 >= t_end:
            break
        t1 = min(t0 + delta, t_end)
        # split at the adjoint horizon, where the distributed control jumps to zero
        cuts = [t0, t1] if not t0 < adjoint.horizon < t1 else [t0, adjoint.horizon, t1]
        for a, b in zip(cuts[:-1], cuts[1:]):
            t = a + 0.5 * (b - a) * (x + 1.0)
            diff = sampled.generators[i][None, :] - adjoint.generator_at(t)
            total += 0.5 * (b - a) * np.sum(w * np.sum((diff @ dom.gram) * diff, axis=1))
    return float(np.sqrt(total))


def fit_order(rows, name):
    """Least-squares fit of log(field) against log(delta): returns (slope, intercept, R^2)."""
    xs, ys = [], []
    dropped = 0
    for row in rows:
        rd = row if isinstance(row, dict) else row.as_dict()
        v = rd.get(name)
        if v is None or not np.isfinite(v) or v <= 0:
            dropped += 1
            continue
        xs.append(math.log(rd["delta"]))
        ys.append(math.log(v))
    if dropped:
        warnings.warn(f"fit_order({name!r}): excluded {dropped} rows with nonpositive or missing values")
    if len(xs) < 4:
        raise ConfigurationError(f"need at least 4 positive rows to fit an order, got {len(xs)}", name)
    res = stats.linregress(xs, ys)
    return float(res.slope), float(res.intercept), float(res.rvalue ** 2)


def build_eta_set(d, y0, target, M, eta, k_range, offsets=(0.25, 0.5, 0.75), T_M=None):
    """Sampled A-set: intervals (T/(k+eta), T/k) below an empirically measured cut-off.

    For each k and each relative offset f the period delta = T/(k + f eta) is
    solved and the budget margin M - N_delta(T_delta) - lambda_1^{3/2} r (1-eta) delta / 2
    recorded. The cut-off is the smallest sampled period where the margin fails
    (or T/min(k) when none fails).
    """
    if not 0 < eta < 1:
        raise ConfigurationError(f"eta must lie in (0, 1), got {eta}", "sweep.eta")
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ConfigurationError("empty k_range", "sweep.k_range")
    if ks[0] < 1:
        raise ConfigurationError("k_range must contain positive integers", "sweep.k_range")
    y0 = as_state(d, y0)
    if T_M is None:
        T_M = optimal_time_distributed(d, y0, target, M).optimal_time
    slope = d.lambda1 ** 1.5 * target.radius
    samples = []
    for k in ks:
        for f in offsets:
            a = f * eta
            delta = T_M / (k + a)
            rec = {"k": k, "a": a, "delta": delta, "ok": False}
            try:
                ts = optimal_time_sampled(d, y0, target, M, delta, k_hint=k + 1)
                margin = M - ts.norm_solution.norm - 0.5 * slope * (1 - eta) * delta
                rec.update(blocks=ts.blocks, margin=margin, ok=bool(margin >= 0 and ts.blocks == k + 1))
            except HeatCtlError as exc:
                rec["error"] = str(exc)
            samples.append(rec)
    failing = [s["delta"] for s in samples if not s["ok"]]
    cutoff = min(failing) if failing else T_M / ks[0]
    kept = tuple(k for k in ks if T_M / k <= cutoff or T_M / (k + eta) < cutoff)
    return EtaSet(float(M), float(eta), float(T_M), kept, float(cutoff), samples)


def _row(d, y0, target, M, delta, T_M, adjoint, eta_set, with_family, family_members=5):
    row = SweepRow(delta=float(delta))
    if eta_set is not None:
        row.in_A = eta_set.contains(delta)
    try:
        ts = optimal_time_sampled(d, y0, target, M, delta, k_hint=max(2, math.ceil(T_M / delta)))
        sol = ts.norm_solution
        row.k = ts.blocks
        row.T_gap = ts.optimal_time - T_M
        row.ctrl_err_min_norm = control_distance(sol.control, adjoint, T_M)
        row.norm_gap = sol.norm - solve_jp_continuous(d, y0, target, ts.optimal_time).norm
        row.z_h1 = _h1_norm(d, sol.minimizer)
        if with_family and row.in_A:
            fam = build_optimal_family(d, y0, target, M, delta, n_members=family_members, time_solution=ts, T_M=T_M)
            row.beta_max = fam.diameter_lower_bound
            row.family_err = max(control_distance(u, adjoint, T_M) for u in fam.members)
    except HeatCtlError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def sweep(d, y0, target, M, deltas, eta_set=None, with_family=False, threads=1, family_members=5):
    """One row of gap quantities per sampling period; solver failures annotate the row."""
    y0 = as_state(d, y0)
    dist = optimal_time_distributed(d, y0, target, M)
    T_M = dist.optimal_time
    work = [float(x) for x in deltas]

    def one(delta):
        return _row(d, y0, target, M, delta, T_M, dist.control, eta_set, with_family, family_members)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, work))
    return [one(x) for x in work]


def norm_gap_ladder(d, y0, target, T, levels=10, k0=2):
    """N_delta(T) - N(T) on the dyadic ladder delta = T / (k0 2^m), m = 0..levels-1."""
    y0 = as_state(d, y0)
    t_exit = exit_time(d, y0, target)
    base = solve_jp_continuous(d, y0, target, T).norm
    rows = []
    for m in range(levels):
        k = k0 * 2 ** m
        delta = T / k
        sol = solve_jp_sampled(d, y0, target, SamplingGrid(delta, k), t_exit=t_exit)
        rows.append(SweepRow(delta=delta, norm_gap=sol.norm - base, k=k, z_h1=_h1_norm(d, sol.minimizer)))
    return rows


def find_delta0(d, y0, target, M, candidates, threads=1):
    """Largest candidate period below which every candidate obeys 0 <= T_delta - T <= 2 delta."""
    cands = sorted(set(float(c) for c in candidates), reverse=True)
    rows = sweep(d, y0, target, M, cands, threads=threads)
    delta0 = None
    for row in reversed(rows):  # ascending delta
        good = row.error is None and -1e-10 <= row.T_gap <= 2 * row.delta + 1e-10
        if not good:
            break
        delta0 = row.delta
    if delta0 is None:
        raise PreconditionError("no candidate period satisfies the two-delta bracket")
    return delta0, rows


def _seed_perpendicular(G, p_star, seed):
    p = seed - (seed @ G @ p_star) / (p_star @ G @ p_star) * p_star
    nrm = float(p @ G @ p)
    return p, nrm


def build_optimal_family(d, y0, target, M, delta, n_members=5, time_solution=None, T_M=None):
    """Explicit optimal controls u = alpha u* + beta v for the sampled time-optimal problem.

    u* is the minimal-norm optimal control; v is a unit sampled control living
    on the first block, orthogonal to u*, and whose response at T_delta has a
    nonpositive inner product with that of u*. alpha and the admissible range
    of beta follow the explicit budget/target algebra; every member is checked
    for ||u|| <= M and ||y(T_delta)|| <= r before it is returned.
    """
    y0 = as_state(d, y0)
    r = target.radius
    if T_M is None:
        T_M = optimal_time_distributed(d, y0, target, M).optimal_time
    ts = time_solution or optimal_time_sampled(d, y0, target, M, delta, k_hint=max(2, math.ceil(T_M / delta)))
    sol = ts.norm_solution
    u_star = sol.control
    grid = u_star.grid
    M_d = sol.norm
    if not M > M_d:
        raise PreconditionError(f"family needs M > N_delta(T_delta) strictly, got M={M}, N_delta={M_d}")
    if grid.delta > T_M:
        raise ConstructionError("no sampling block lies inside (0, T(M))")
    z = sol.minimizer
    z_norm = float(np.linalg.norm(z))
    G = d.gram

    p_star = u_star.generators[0]
    p = None
    for j in range(d.modes):
        seed = np.zeros(d.modes)
        seed[j] = 1.0
        cand, nrm = _seed_perpendicular(G, p_star, seed)
        if nrm > 1e-8:
            p = cand / math.sqrt(nrm * grid.delta)
            break
    if p is None:
        raise ConstructionError("could not build a perturbation orthogonal to the optimal control")
    P = np.zeros((grid.blocks, d.modes))
    P[0] = p
    v_hat = SampledControl(grid, P, d)
    y_u = u_star.response()
    y_v = v_hat.response()
    b = float(y_u @ y_v)
    if b > 0:
        v_hat = -1.0 * v_hat
        y_v = -y_v
        b = -b
    a = float(np.linalg.norm(y_v))
    c = float(np.linalg.norm(y_u))
    gap = M - M_d
    lam_hat = min(r * M_d ** 3 / (z_norm * c * c * gap), 0.5)
    alpha = 1.0 + lam_hat * gap / M_d
    bound_budget = M * (1.0 - lam_hat) * gap
    bound_target = math.inf if a == 0 else lam_hat * r * M_d * gap / (a * a * z_norm)
    beta_max = math.sqrt(min(bound_budget, bound_target))

    members = []
    betas = np.linspace(0.0, beta_max, n_members)
    for beta in betas:
        u = alpha * u_star + float(beta) * v_hat
        norm_u = u.norm()
        y_end = np.linalg.norm(u.final_state(y0))
        if norm_u > M + 1e-10 or y_end > r + 1e-8:
            raise ConstructionError(
                f"family member beta={beta} violates budget/target: ||u||={norm_u}, ||y||={y_end}"
            )
        members.append(u)
    details = {
        "alpha": alpha,
        "betas": betas.tolist(),
        "lambda_hat": lam_hat,
        "a": a,
        "b": b,
        "c": c,
        "M_delta": M_d,
        "z_norm": z_norm,
        "orthogonality": u_star.inner(v_hat),
        "T_delta": ts.optimal_time,
    }
    return FamilyResult(members, beta_max, details)


def family_vs_distributed_error(d, y0, target, M, delta, T_M=None, family=None):
    """Largest ||u - u*_M||_{L2(0, T(M))} over the constructed optimal family."""
    y0 = as_state(d, y0)
    dist = optimal_time_distributed(d, y0, target, M)
    T_M = dist.optimal_time if T_M is None else T_M
    fam = family or build_optimal_family(d, y0, target, M, delta, T_M=T_M)
    return max(control_distance(u, dist.control, T_M) for u in fam.members)


def _hunt_one(d, y0, target, M, T_M, k, t_exit, rel_tol):
    def surplus(delta):
        sol = solve_jp_sampled(d, y0, target, SamplingGrid(delta, k + 1), t_exit=t_exit)
        return sol.norm - M

    base = T_M / (k + 1)
    if (k + 1) * base >= t_exit or k + 1 < 2:
        return None
    lo = base
    step = 1e-9 * base
    hi = base + step
    while surplus(hi) > 0:
        lo = hi
        step *= 2.0
        hi = base + step
        if hi >= T_M / k or (k + 1) * hi >= t_exit:
            return None
    while hi - lo > rel_tol * base:
        mid = 0.5 * (lo + hi)
        if surplus(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def quadratic_gap_hunt(d, y0, target, M, k_range, rel_tol=1e-14, T_M=None):
    """For each k, the smallest delta > T/(k+1) with T_delta = (k+1) delta; returns (delta, T_gap) pairs.

    Just above T/(k+1) the time gap (k+1) delta - T is of the size of the
    sampled-vs-distributed norm gap, i.e. O(delta^2). Missing entries are
    reported as ``None``.
    """
    y0 = as_state(d, y0)
    t_exit = exit_time(d, y0, target)
    if T_M is None:
        T_M = optimal_time_distributed(d, y0, target, M).optimal_time
    out = []
    for k in k_range:
        delta = _hunt_one(d, y0, target, M, T_M, int(k), t_exit, rel_tol)
        if delta is None:
            out.append((None, None))
            continue
        ts = optimal_time_sampled(d, y0, target, M, delta, k_hint=int(k) + 1)
        if ts.blocks != int(k) + 1:
            log.warning("hunt at k=%d: optimal sampled time uses %d blocks", k, ts.blocks)
        out.append((delta, ts.optimal_time - T_M))
    return out
