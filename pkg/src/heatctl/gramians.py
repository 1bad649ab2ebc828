"""Time-integrated Gramians of the adjoint heat flow and block averaging in time.

For a terminal datum z the adjoint state is phi(t; T, z) = exp(-Lambda (T - t)) z.
The continuous Gramian W(T) and its sampled counterpart W_delta satisfy

    z' W z       = int_0^T      ||chi_w phi(t; T, z)||^2 dt
    z' W_delta z = int_0^{k d}  ||chi_w phibar_d(t; k d, z)||^2 dt

where phibar_d replaces phi by its mean over each sampling block.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DomainError, NumericalError
from .spectral import as_state


@dataclass(frozen=True)
class SamplingGrid:
    delta: float
    blocks: int

    def __post_init__(self):
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ConfigurationError(f"sampling period must be positive, got {self.delta}", "delta")
        if int(self.blocks) != self.blocks or self.blocks < 1:
            raise ConfigurationError(f"block count must be a positive integer, got {self.blocks}", "k")
        object.__setattr__(self, "blocks", int(self.blocks))

    @property
    def horizon(self):
        return self.blocks * self.delta

    @property
    def instants(self):
        return self.delta * np.arange(1, self.blocks + 1)

    def block_of(self, t):
        """Index (0-based) of the block ((i-1) d, i d] containing each time in ``t``."""
        idx = np.ceil(np.asarray(t, dtype=float) / self.delta).astype(int) - 1
        return np.clip(idx, 0, self.blocks - 1)


@dataclass(frozen=True)
class Gramian:
    matrix: np.ndarray = field(repr=False)
    horizon: float
    kind: str = "continuous"
    delta: float = None
    blocks: int = None

    def quadratic(self, z):
        return float(z @ self.matrix @ z)


def averaging_factors(lambdas, delta):
    """mu_j = (1 - exp(-lambda_j d)) / (lambda_j d): block mean of exp(-lambda_j s) over (0, d)."""
    x = np.asarray(lambdas, dtype=float) * delta
    return -np.expm1(-x) / x


def block_generators(d, grid, z):
    """Block values of the averaged adjoint phibar_d(.; k d, z), shape (k, J).

    Row i (0-based) is diag(mu_j exp(-lambda_j (k-1-i) d)) z.
    """
    mu = averaging_factors(d.lambdas, grid.delta)
    lag = (grid.blocks - 1 - np.arange(grid.blocks))[:, None] * grid.delta
    return mu[None, :] * np.exp(-d.lambdas[None, :] * lag) * z[None, :]


def continuous_gramian(d, T):
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T}")
    W = _kernels.continuous_gramian(d.lambdas, np.ascontiguousarray(d.gram), float(T))
    return Gramian(W, float(T))


def sampled_gramian(d, grid):
    W = _kernels.sampled_gramian(
        d.lambdas, np.ascontiguousarray(d.gram), float(grid.delta), int(grid.blocks)
    )
    return Gramian(W, grid.horizon, "sampled", grid.delta, grid.blocks)


@dataclass(frozen=True)
class TimeSignal:
    """A time-dependent L2(Omega) element sampled at quadrature nodes on (0, horizon]."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    @property
    def horizon(self):
        return float(self.weights.sum())

    @classmethod
    def gauss(cls, grid, func, nodes_per_block=8):
        """Composite Gauss-Legendre discretization of ``func`` on the blocks of ``grid``.

        ``func`` maps an array of n times to an (n, J) array of coefficients.
        """
        x, w = np.polynomial.legendre.leggauss(nodes_per_block)
        left = grid.delta * np.arange(grid.blocks)
        nodes = (left[:, None] + 0.5 * grid.delta * (x[None, :] + 1.0)).ravel()
        weights = np.tile(0.5 * grid.delta * w, grid.blocks)
        values = np.atleast_2d(np.asarray(func(nodes), dtype=float))
        if values.shape[0] != nodes.size:
            raise DomainError("signal function returned the wrong number of rows")
        return cls(nodes, weights, values)

    def inner(self, other):
        if self.nodes.shape != other.nodes.shape or not np.array_equal(self.nodes, other.nodes):
            raise DomainError("signals live on different quadrature grids")
        return float(np.sum(self.weights * np.sum(self.values * other.values, axis=1)))

    def norm_sq(self):
        return self.inner(self)

    def __sub__(self, other):
        if not np.array_equal(self.nodes, other.nodes):
            raise DomainError("signals live on different quadrature grids")
        return TimeSignal(self.nodes, self.weights, self.values - other.values)


def block_average(f, grid):
    """Replace ``f`` on each block ((i-1) d, i d] by its block mean."""
    if not np.isclose(f.horizon, grid.horizon, rtol=1e-12, atol=0.0):
        raise DomainError(f"signal horizon {f.horizon} does not match grid horizon {grid.horizon}")
    if np.any(f.nodes <= 0) or np.any(f.nodes > grid.horizon * (1 + 1e-15)):
        raise DomainError("signal nodes must lie in (0, k d]")
    idx = grid.block_of(f.nodes)
    sums = np.zeros((grid.blocks, f.values.shape[1]))
    np.add.at(sums, idx, f.weights[:, None] * f.values)
    means = sums / grid.delta
    return TimeSignal(f.nodes, f.weights, means[idx])


def pythagoras_check(f, grid):
    """Return (||f||^2, ||fbar||^2, ||f - fbar||^2) for the block average fbar of ``f``."""
    fbar = block_average(f, grid)
    return f.norm_sq(), fbar.norm_sq(), (f - fbar).norm_sq()


def interpolation_ratio(d, T, S, z):
    """||phi(0)|| / (||z||^{1/2} ||(1/S) int_0^S phi dt||_w^{1/2}) for phi = phi(.; T, z).

    Used only to fit the constant of the interpolation-type observability
    estimate over samples of z; no bound is asserted here.
    """
    if not (0 < S < T):
        raise DomainError(f"need 0 < S < T, got S={S}, T={T}")
    z = as_state(d, z)
    lam = d.lambdas
    top = np.linalg.norm(np.exp(-lam * T) * z)
    # (1/S) int_0^S exp(-lam (T - t)) dt = exp(-lam (T - S)) * mu(lam S)
    avg = np.exp(-lam * (T - S)) * averaging_factors(lam, S) * z
    obs_sq = float(avg @ d.gram @ avg)
    den_sq = np.linalg.norm(z) * np.sqrt(max(obs_sq, 0.0))
    if not den_sq > 0:
        raise NumericalError("zero observation in interpolation ratio", {"z_norm": float(np.linalg.norm(z))})
    return float(top / np.sqrt(den_sq))
