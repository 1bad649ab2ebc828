"""Minimal-norm controls through the dual ball-regularized quadratic.

For a horizon T (or k sampling blocks of length d) the dual functional is

    J(z) = 1/2 z' W z + q' z + r ||z||,    q = exp(-Lambda T) y0,

with W the continuous or sampled Gramian. Its unique nonzero minimizer z*
generates the minimal-norm control (chi_w phi or chi_w phibar_d), the optimal
norm is N = sqrt(z*' W z*), and the optimal value is -N^2 / 2.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, NumericalError, PreconditionError, ZeroMinimizer
from .gramians import (
    Gramian,
    SamplingGrid,
    block_generators,
    continuous_gramian,
    sampled_gramian,
)
from .spectral import as_state, exit_time

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class AdjointControl:
    """v(t) = chi_w phi(t; T, z) on (0, T)."""

    horizon: float
    generator: np.ndarray = field(repr=False)
    domain: object = field(repr=False)

    def generator_at(self, t):
        """phi(t; T, z), extended by zero for t > T."""
        t = np.asarray(t, dtype=float)
        lag = np.maximum(self.horizon - t, 0.0)
        out = np.exp(-np.multiply.outer(lag, self.domain.lambdas)) * self.generator
        out[t > self.horizon] = 0.0
        return out

    def coefficients_at(self, t):
        """Eigenbasis coefficients of chi_w phi(t)."""
        return self.generator_at(t) @ self.domain.gram

    def norm(self):
        W = continuous_gramian(self.domain, self.horizon).matrix
        return float(np.sqrt(max(self.generator @ W @ self.generator, 0.0)))

    def response(self):
        """State at the horizon reached from rest."""
        return continuous_gramian(self.domain, self.horizon).matrix @ self.generator

    def final_state(self, y0):
        return np.exp(-self.domain.lambdas * self.horizon) * y0 + self.response()


@dataclass(frozen=True)
class SampledControl:
    """Piecewise-constant control chi_w p_i on ((i-1) d, i d], i = 1..k.

    ``generators`` holds the unmasked block values p_i (shape (k, J)); the
    eigenbasis coefficients of the masked values are ``generators @ G``.
    """

    grid: SamplingGrid
    generators: np.ndarray = field(repr=False)
    domain: object = field(repr=False)

    def __post_init__(self):
        P = np.asarray(self.generators, dtype=float)
        if P.shape != (self.grid.blocks, self.domain.modes):
            raise DomainError(f"generators must have shape {(self.grid.blocks, self.domain.modes)}")
        if not np.all(np.isfinite(P)):
            raise DomainError("sampled control values must be finite")
        object.__setattr__(self, "generators", np.ascontiguousarray(P))

    @property
    def coefficients(self):
        return self.generators @ self.domain.gram

    def block_norms_sq(self):
        P = self.generators
        return np.sum((P @ self.domain.gram) * P, axis=1)

    def norm(self, t_end=None):
        """L2 norm over (0, k d), or over (0, t_end) when given."""
        sq = self.block_norms_sq()
        if t_end is None:
            return float(np.sqrt(max(self.grid.delta * sq.sum(), 0.0)))
        t0 = self.grid.delta * np.arange(self.grid.blocks)
        length = np.clip(t_end - t0, 0.0, self.grid.delta)
        return float(np.sqrt(max(length @ sq, 0.0)))

    def inner(self, other):
        if other.grid != self.grid:
            raise DomainError("controls live on different sampling grids")
        return float(self.grid.delta * np.sum((self.generators @ self.domain.gram) * other.generators))

    def response(self):
        return _kernels.sampled_response(
            self.domain.lambdas, np.ascontiguousarray(self.domain.gram), self.generators, float(self.grid.delta)
        )

    def final_state(self, y0):
        return np.exp(-self.domain.lambdas * self.grid.horizon) * y0 + self.response()

    def __add__(self, other):
        if other.grid != self.grid:
            raise DomainError("controls live on different sampling grids")
        return SampledControl(self.grid, self.generators + other.generators, self.domain)

    def __mul__(self, c):
        return SampledControl(self.grid, float(c) * self.generators, self.domain)

    __rmul__ = __mul__


@dataclass(frozen=True)
class NormSolution:
    minimizer: np.ndarray = field(repr=False)
    value: float
    norm: float
    euler_lagrange_residual: float
    final_state: np.ndarray = field(repr=False)
    control: object = field(repr=False)


def _as_matrix(W):
    return W.matrix if isinstance(W, Gramian) else np.asarray(W, dtype=float)


def euler_lagrange_residual(W, q, r, z):
    W = _as_matrix(W)
    return float(np.linalg.norm(W @ z + q + r * z / np.linalg.norm(z)))


def dual_value(W, q, r, z):
    W = _as_matrix(W)
    return float(0.5 * z @ W @ z + q @ z + r * np.linalg.norm(z))


def proximal_gradient(W, q, r, z0=None, step=None, tol=1e-12, max_iter=200_000):
    """Minimize 1/2 z'Wz + q'z + r||z|| by proximal gradient with block soft thresholding.

    Stops when successive iterates differ by less than ``tol`` (absolute).
    """
    W = _as_matrix(W)
    q = np.asarray(q, dtype=float)
    if step is None:
        step = 1.0 / np.linalg.norm(W, 2)
    z = np.zeros_like(q) if z0 is None else np.array(z0, dtype=float)
    for it in range(max_iter):
        v = z - step * (W @ z + q)
        nv = np.linalg.norm(v)
        shrink = max(0.0, 1.0 - step * r / nv) if nv > 0 else 0.0
        z_new = shrink * v
        if np.linalg.norm(z_new - z) < tol:
            return z_new
        z = z_new
    raise NumericalError(
        "proximal gradient did not converge",
        {"iterations": max_iter, "last_step": float(np.linalg.norm(z_new - z))},
    )


def _newton_polish(W, q, r, z, steps=3):
    for _ in range(steps):
        nz = np.linalg.norm(z)
        F = W @ z + q + r * z / nz
        u = z / nz
        Jac = W + (r / nz) * (np.eye(z.size) - np.outer(u, u))
        try:
            dz = np.linalg.solve(Jac, -F)
        except np.linalg.LinAlgError:
            break
        z = z + dz
    return z


def secular_solve(W, q, r, tol=RESIDUAL_TOL, max_iter=200, diagonal=None):
    """Nonzero minimizer of 1/2 z'Wz + q'z + r||z|| for symmetric PSD ``W``.

    With nu = r / ||z||, stationarity reads (W + nu I) z = -q. In the eigenbasis
    of W the scalar equation 1/||z(nu)|| - nu/r = 0 is solved by Newton steps
    safeguarded by a bisection bracket. Raises :class:`ZeroMinimizer` when
    ``||q|| <= r``. A diagonal ``W`` (full control window) skips the
    eigendecomposition; ``diagonal=False`` forces the general path.
    """
    W = _as_matrix(W)
    q = np.asarray(q, dtype=float)
    qn = np.linalg.norm(q)
    if qn <= r:
        raise ZeroMinimizer(f"||q|| = {qn} <= r = {r}: the origin minimizes the dual functional")
    if diagonal is None:
        diagonal = not np.any(W - np.diag(np.diag(W)))
    if diagonal:
        w, Q = np.maximum(np.diag(W).copy(), 0.0), None
        qt = q
    else:
        w, Q = np.linalg.eigh(W)
        w = np.maximum(w, 0.0)
        qt = Q.T @ q
    qt2 = qt * qt
    null = w <= 64 * np.finfo(float).eps * max(w.max(), 1e-300)
    if np.any(null) and np.sqrt(qt2[null].sum()) >= r:
        raise NumericalError(
            "dual functional unbounded below: the kernel of W carries ||q|| >= r",
            {"kernel_dim": int(null.sum()), "q_kernel": float(np.sqrt(qt2[null].sum()))},
        )
    # ||q|| / (w_max + nu) <= ||z(nu)|| <= ||q|| / (w_min + nu) brackets the root
    lo = r * w.min() / (qn - r)
    hi = r * w.max() / (qn - r)
    if lo <= 0.0:
        lo = 0.0
    nu = hi
    converged = False
    for it in range(max_iter):
        d = w + nu
        if nu == 0.0 and np.any(d == 0.0):
            nu = 0.5 * (lo + hi)
            continue
        zn = np.sqrt(np.sum(qt2 / d**2))
        psi = 1.0 / zn - nu / r
        if psi > 0:
            lo = nu
        else:
            hi = nu
        dpsi = np.sum(qt2 / d**3) / zn**3 - 1.0 / r
        nxt = nu - psi / dpsi if dpsi != 0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - nu) <= 4 * np.finfo(float).eps * max(nu, 1e-300) or hi - lo <= 4 * np.finfo(float).eps * hi:
            nu = nxt
            converged = True
            break
        nu = nxt
    z = -(qt / (w + nu))
    if Q is not None:
        z = Q @ z
    scale = tol * max(1.0, qn)
    res = euler_lagrange_residual(W, q, r, z)
    if res > scale:
        z = _newton_polish(W, q, r, z)
        res = euler_lagrange_residual(W, q, r, z)
    if res > scale:
        log.warning("secular solve stalled (residual %.3e); falling back to proximal gradient", res)
        z = proximal_gradient(W, q, r, z0=z)
        res = euler_lagrange_residual(W, q, r, z)
    if res > scale:
        raise NumericalError(
            "ball-regularized quadratic did not reach the residual tolerance",
            {"residual": res, "tolerance": scale, "secular_converged": converged, "nu": nu},
        )
    return z


def _check_initial(d, y0, target):
    y0 = as_state(d, y0)
    return y0, exit_time(d, y0, target)


def _assemble(W, q, r, control_factory, y0_free):
    try:
        z = secular_solve(W, q, r)
    except ZeroMinimizer as exc:
        raise PreconditionError("target reachable by free dynamics") from exc
    Wm = W.matrix
    n2 = float(z @ Wm @ z)
    final = y0_free + Wm @ z
    return NormSolution(
        minimizer=z,
        value=dual_value(Wm, q, r, z),
        norm=float(np.sqrt(max(n2, 0.0))),
        euler_lagrange_residual=euler_lagrange_residual(Wm, q, r, z),
        final_state=final,
        control=control_factory(z),
    )


def solve_jp_continuous(d, y0, target, T):
    """Minimal-norm distributed control steering ``y0`` into the ball at time ``T``."""
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T}")
    y0, t_exit = _check_initial(d, y0, target)
    if T >= t_exit:
        raise PreconditionError(
            f"target reachable by free dynamics: T = {T} >= exit time {t_exit}"
        )
    W = continuous_gramian(d, T)
    q = np.exp(-d.lambdas * T) * y0
    return _assemble(W, q, target.radius, lambda z: AdjointControl(float(T), z, d), q)


def check_sampling(grid, t_exit):
    """Membership of (delta, k) in the admissible set 2 d <= k d < T*."""
    if grid.blocks < 2 or grid.horizon >= t_exit:
        raise PreconditionError(
            f"outside P_T*: need k >= 2 and k d < {t_exit}, got k={grid.blocks}, k d={grid.horizon}"
        )


def solve_jp_sampled(d, y0, target, grid, t_exit=None):
    """Minimal-norm sampled-data control steering ``y0`` into the ball at time k d."""
    y0 = as_state(d, y0)
    if t_exit is None:
        t_exit = exit_time(d, y0, target)
    check_sampling(grid, t_exit)
    W = sampled_gramian(d, grid)
    q = np.exp(-d.lambdas * grid.horizon) * y0
    return _assemble(
        W, q, target.radius, lambda z: SampledControl(grid, block_generators(d, grid, z), d), q
    )


def l2_approx_null_control(d, y0, grid, eps, cost):
    """Exact minimizer of (1/C)||u||^2 + (1/eps)||y(k d)||^2 over sampled controls.

    Optimality gives u_i = -(C/eps) Abar_i y(k d), hence
    y(k d) = (I + (C/eps) W_delta)^{-1} exp(-Lambda k d) y0.
    Returns the control and the attained value.
    """
    if not (eps > 0 and cost > 0):
        raise DomainError(f"eps and cost must be positive, got eps={eps}, C={cost}")
    if grid.blocks < 2:
        raise PreconditionError("approximate null controllability with a cost needs k >= 2")
    y0 = as_state(d, y0)
    Wd = sampled_gramian(d, grid).matrix
    ratio = cost / eps
    A = np.eye(d.modes) + ratio * Wd
    rhs = np.exp(-d.lambdas * grid.horizon) * y0
    try:
        y_end = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular normal equations", {"cost": cost, "eps": eps}) from exc
    control = SampledControl(grid, -ratio * block_generators(d, grid, y_end), d)
    value = control.norm() ** 2 / cost + float(y_end @ y_end) / eps
    return control, value


def smallest_cost(d, y0, grid, eps, rtol=1e-10, c_hi=1.0):
    """Smallest C with (1/C)||u||^2 + (1/eps)||y(k d)||^2 <= ||y0||^2 at the optimal u.

    The attained value decreases in C, so the threshold is found by bisection on log C.
    """
    y0 = as_state(d, y0)
    budget = float(y0 @ y0)

    def ok(c):
        return l2_approx_null_control(d, y0, grid, eps, c)[1] <= budget

    while not ok(c_hi):
        c_hi *= 4.0
        if c_hi > 1e300:
            raise NumericalError("no finite cost satisfies the inequality", {"eps": eps})
    c_lo = c_hi
    while ok(c_lo) and c_lo > 1e-300:
        c_lo /= 4.0
    if ok(c_lo):
        return c_lo
    while c_hi / c_lo - 1.0 > rtol:
        mid = np.sqrt(c_lo * c_hi)
        if ok(mid):
            c_hi = mid
        else:
            c_lo = mid
    return c_hi
