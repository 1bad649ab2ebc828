"""Dirichlet eigenbasis on an interval, actuator Gram matrix and heat semigroup.

Elements of L2(0, L) are stored as coefficient vectors in the orthonormal
basis e_j(x) = sqrt(2/L) sin(j pi x / L), j = 1..J.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, TargetError

EXIT_TIME_TOL = 1e-12


@dataclass(frozen=True)
class DomainSpec:
    """Truncated spectral model of the heat equation on (0, L) with control window (a, b)."""

    length: float
    omega: tuple
    modes: int
    lambdas: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)

    @property
    def lambda1(self):
        return float(self.lambdas[0])

    @property
    def full_window(self):
        return self.omega[0] == 0.0 and self.omega[1] == self.length

    def eigenfunctions(self, x):
        """Evaluate e_1..e_J at points ``x``; returns an array of shape (len(x), J)."""
        x = np.asarray(x, dtype=float)
        j = np.arange(1, self.modes + 1)
        return np.sqrt(2.0 / self.length) * np.sin(np.multiply.outer(x, j) * np.pi / self.length)


@dataclass(frozen=True)
class BallTarget:
    radius: float

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ConfigurationError(f"target radius must be positive, got {self.radius}", "r")


def _sine_product_antiderivative(x, L, J):
    # F_ij(x) with dF/dx = (2/L) sin(i pi x/L) sin(j pi x/L)
    j = np.arange(1, J + 1)
    d = j[:, None] - j[None, :]
    s = j[:, None] + j[None, :]
    F = np.zeros((J, J))
    off = d != 0
    F[off] = np.sin(d[off] * np.pi * x / L) / (d[off] * np.pi)
    F -= np.sin(s * np.pi * x / L) / (s * np.pi)
    F[np.diag_indices(J)] += x / L
    return F


def build_domain(L, a, b, J):
    """Build eigenvalues (j pi / L)^2 and the Gram matrix G_ij = int_a^b e_i e_j dx.

    The entries of G come from the antiderivative of products of sines, so no
    quadrature is involved. When (a, b) = (0, L) the identity is returned.
    """
    L, a, b = float(L), float(a), float(b)
    if not (np.isfinite(L) and L > 0):
        raise ConfigurationError(f"length must be positive, got {L}", "domain.L")
    if int(J) != J or J < 1:
        raise ConfigurationError(f"mode count must be a positive integer, got {J}", "domain.J")
    J = int(J)
    if not (0.0 <= a < b <= L):
        raise ConfigurationError(
            f"control window must satisfy 0 <= a < b <= L, got ({a}, {b}) with L={L}", "domain.omega"
        )
    lambdas = (np.arange(1, J + 1) * np.pi / L) ** 2
    if a == 0.0 and b == L:
        G = np.eye(J)
    else:
        G = _sine_product_antiderivative(b, L, J) - _sine_product_antiderivative(a, L, J)
        G = 0.5 * (G + G.T)
    lambdas.setflags(write=False)
    G.setflags(write=False)
    return DomainSpec(L, (a, b), J, lambdas, G)


def as_state(d, v):
    """Validate a coefficient vector against the domain and return it as a float array."""
    v = np.asarray(v, dtype=float)
    if v.shape != (d.modes,):
        raise DomainError(f"expected {d.modes} coefficients, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("coefficients must be finite")
    return v


def semigroup_apply(d, t, v):
    """Free heat flow: returns (exp(-lambda_j t) v_j)_j."""
    if t < 0:
        raise DomainError(f"semigroup time must be nonnegative, got {t}")
    v = as_state(d, v)
    return np.exp(-d.lambdas * t) * v


def exit_time(d, y0, target, tol=EXIT_TIME_TOL):
    """Last time the free trajectory from ``y0`` lies outside the target ball.

    Solves sum_j y0_j^2 exp(-2 lambda_j t) = r^2 by bisection; the upper end of the
    bracket is doubled until the sign changes.
    """
    y0 = as_state(d, y0)
    r2 = target.radius ** 2
    c2 = y0 ** 2
    if c2.sum() <= r2:
        raise TargetError("initial state already in target")

    def excess(t):
        return np.sum(c2 * np.exp(-2.0 * d.lambdas * t)) - r2

    lo, hi = 0.0, 1.0 / d.lambda1
    while excess(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
