import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatctl import SamplingGrid, build_domain, continuous_gramian, sampled_gramian
from heatctl.errors import ConfigurationError, DomainError
from heatctl.gramians import (
    TimeSignal,
    averaging_factors,
    block_average,
    block_generators,
    interpolation_ratio,
    pythagoras_check,
)


def _gauss(a, b, n=40):
    x, w = np.polynomial.legendre.leggauss(n)
    return a + 0.5 * (b - a) * (x + 1), 0.5 * (b - a) * w


def test_continuous_gramian_diagonal_closed_form():
    d = build_domain(1.0, 0.0, 1.0, 5)
    T = 0.07
    W = continuous_gramian(d, T).matrix
    lam = d.lambdas
    assert np.allclose(W, np.diag(-np.expm1(-2 * lam * T) / (2 * lam)), rtol=1e-14, atol=0)
    W_inf = continuous_gramian(d, 50.0).matrix
    assert np.allclose(np.diag(W_inf), 1 / (2 * lam), rtol=1e-14)


def test_continuous_gramian_quadrature(rng):
    d = build_domain(1.0, 0.25, 0.75, 8)
    T = 0.05
    W = continuous_gramian(d, T)
    for _ in range(5):
        z = rng.standard_normal(8)
        # split (0, T) so the fast modes near t = T are resolved
        total = 0.0
        edges = [0.0] + list(T - np.geomspace(T / 2, 1e-6, 12)) + [T]
        for a, b in zip(edges[:-1], edges[1:]):
            t, w = _gauss(a, b)
            phi = np.exp(-np.outer(T - t, d.lambdas)) * z
            total += np.sum(w * np.einsum("ni,ij,nj->n", phi, d.gram, phi))
        assert W.quadratic(z) == pytest.approx(total, rel=1e-10)


def test_continuous_gramian_rejects_nonpositive_horizon():
    d = build_domain(1.0, 0.25, 0.75, 4)
    with pytest.raises(DomainError):
        continuous_gramian(d, 0.0)


def test_sampled_gramian_scalar():
    d = build_domain(1.0, 0.0, 1.0, 1)
    delta = 0.01
    lam = d.lambdas[0]
    mu = (1 - math.exp(-lam * delta)) / (lam * delta)
    assert sampled_gramian(d, SamplingGrid(delta, 1)).matrix[0, 0] == pytest.approx(delta * mu ** 2, rel=1e-14)
    w2 = delta * (mu ** 2 * math.exp(-2 * lam * delta) + mu ** 2)
    assert sampled_gramian(d, SamplingGrid(delta, 2)).matrix[0, 0] == pytest.approx(w2, rel=1e-14)


def test_sampled_gramian_block_means(rng):
    d = build_domain(1.0, 0.25, 0.75, 8)
    grid = SamplingGrid(0.004, 7)
    T = grid.horizon
    z = rng.standard_normal(8)
    total = 0.0
    for i in range(grid.blocks):
        t, w = _gauss(i * grid.delta, (i + 1) * grid.delta)
        phi = np.exp(-np.outer(T - t, d.lambdas)) * z
        mean = (w[:, None] * phi).sum(axis=0) / grid.delta
        total += grid.delta * mean @ d.gram @ mean
    assert sampled_gramian(d, grid).quadratic(z) == pytest.approx(total, rel=1e-10)
    gens = block_generators(d, grid, z)
    assert np.sum(grid.delta * np.einsum("ni,ij,nj->n", gens, d.gram, gens)) == pytest.approx(total, rel=1e-10)


def test_sampled_gramian_converges_and_stays_below():
    d = build_domain(1.0, 0.25, 0.75, 16)
    T = 0.04
    W = continuous_gramian(d, T).matrix
    errs = []
    for k in (4, 8, 16, 32, 64):
        Wd = sampled_gramian(d, SamplingGrid(T / k, k)).matrix
        assert np.linalg.eigvalsh(W - Wd).min() > -1e-15
        errs.append(np.linalg.norm(W - Wd))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < errs[0] / 10


def test_averaging_factor_limit():
    assert averaging_factors(np.array([1e-12, 1e-8]), 0.1) == pytest.approx([1.0, 1.0], abs=1e-9)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        SamplingGrid(0.0, 3)
    with pytest.raises(ConfigurationError):
        SamplingGrid(0.1, 0)
    g = SamplingGrid(0.1, 3)
    assert g.horizon == pytest.approx(0.3)
    assert list(g.block_of(np.array([0.05, 0.1, 0.15, 0.3]))) == [0, 0, 1, 2]


def test_averaging_fixed_points():
    grid = SamplingGrid(0.2, 3)
    f = TimeSignal.gauss(grid, lambda t: np.full((t.size, 2), 1.5))
    assert np.allclose(block_average(f, grid).values, 1.5, atol=1e-15)
    one = SamplingGrid(0.3, 1)
    lin = TimeSignal.gauss(one, lambda t: t[:, None])
    assert np.allclose(block_average(lin, one).values, 0.15, atol=1e-15)


def test_pythagoras_linear():
    delta = 0.3
    grid = SamplingGrid(delta, 1)
    f = TimeSignal.gauss(grid, lambda t: t[:, None])
    full, avg, rest = pythagoras_check(f, grid)
    assert full == pytest.approx(delta ** 3 / 3, rel=1e-14)
    assert avg == pytest.approx(delta ** 3 / 4, rel=1e-14)
    assert rest == pytest.approx(delta ** 3 / 12, rel=1e-13)
    c = TimeSignal.gauss(grid, lambda t: np.full((t.size, 1), 2.0))
    assert pythagoras_check(c, grid) == pytest.approx((4 * delta, 4 * delta, 0.0), abs=1e-14)


def test_block_average_horizon_mismatch():
    f = TimeSignal.gauss(SamplingGrid(0.1, 3), lambda t: t[:, None])
    with pytest.raises(DomainError):
        block_average(f, SamplingGrid(0.1, 4))


@settings(max_examples=50, deadline=None)
@given(
    delta=st.floats(1e-3, 1.0),
    k=st.integers(1, 12),
    seed=st.integers(0, 2 ** 31),
)
def test_averaging_is_self_adjoint_projection(delta, k, seed):
    rng = np.random.default_rng(seed)
    grid = SamplingGrid(delta, k)
    fv = rng.standard_normal((8 * k, 3))
    gv = rng.standard_normal((8 * k, 3))
    f = TimeSignal.gauss(grid, lambda t: fv)
    g = TimeSignal.gauss(grid, lambda t: gv)
    fb, gb = block_average(f, grid), block_average(g, grid)
    scale = math.sqrt(f.norm_sq() * g.norm_sq())
    assert abs(fb.inner(g) - f.inner(gb)) <= 1e-12 * scale
    assert abs(fb.inner(g) - fb.inner(gb)) <= 1e-12 * scale
    # idempotence
    assert np.allclose(block_average(fb, grid).values, fb.values, rtol=0, atol=1e-14 * np.abs(fv).max())
    full, avg, rest = pythagoras_check(f, grid)
    assert abs(full - avg - rest) <= 1e-12 * full


def test_interpolation_ratio_single_mode():
    d = build_domain(1.0, 0.0, 1.0, 3)
    T, S = 0.1, 0.04
    lam = d.lambdas[0]
    avg = math.exp(-lam * (T - S)) * (1 - math.exp(-lam * S)) / (lam * S)
    expect = math.exp(-lam * T) / math.sqrt(avg)
    z = np.array([1.0, 0.0, 0.0])
    assert interpolation_ratio(d, T, S, z) == pytest.approx(expect, rel=1e-13)
    assert interpolation_ratio(d, T, S, 7.5 * z) == pytest.approx(expect, rel=1e-13)


def test_interpolation_ratio_sampling(rng):
    d = build_domain(1.0, 0.25, 0.75, 16)
    vals = [interpolation_ratio(d, 0.1, 0.05, rng.standard_normal(16)) for _ in range(1000)]
    assert np.all(np.isfinite(vals)) and max(vals) > 0
    with pytest.raises(DomainError):
        interpolation_ratio(d, 0.1, 0.1, np.ones(16))
