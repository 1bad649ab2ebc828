import math

import numpy as np
import pytest

from heatctl import optimal_time_distributed, optimal_time_sampled, solve_jp_sampled
from heatctl.errorlab import (
    SweepRow,
    build_eta_set,
    build_optimal_family,
    control_distance,
    control_distance_quadrature,
    family_vs_distributed_error,
    fit_order,
    norm_gap_ladder,
    quadratic_gap_hunt,
    sweep,
)
from heatctl.errors import ConfigurationError, ConstructionError
from heatctl.minnorm import SampledControl


@pytest.fixture(scope="module")
def eta_set(ref):
    return build_eta_set(ref.domain, ref.y0, ref.target, ref.M, 0.5, range(3, 41), T_M=ref.T_M)


def test_fit_order_exact_power_law():
    rows = [{"delta": d, "x": 3.7 * d ** 1.37} for d in np.geomspace(1e-4, 1e-1, 9)]
    slope, intercept, r2 = fit_order(rows, "x")
    assert slope == pytest.approx(1.37, abs=1e-6)
    assert intercept == pytest.approx(math.log(3.7), abs=1e-6)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_order_excludes_and_warns():
    rows = [SweepRow(delta=d, norm_gap=d ** 2) for d in (0.1, 0.05, 0.02, 0.01)]
    rows.append(SweepRow(delta=0.005))
    with pytest.warns(UserWarning, match="excluded 1"):
        slope, _, _ = fit_order(rows, "norm_gap")
    assert slope == pytest.approx(2.0, abs=1e-9)
    with pytest.raises(ConfigurationError):
        fit_order(rows[:3], "norm_gap")


def test_control_distance_matches_quadrature(ref, rng):
    d, y0, tg = ref.domain, ref.y0, ref.target
    for n in (9, 31, 120):
        delta = ref.T_M / (n + 0.3)
        ts = optimal_time_sampled(d, y0, tg, ref.M, delta)
        ctl = ts.control
        adj = optimal_time_distributed(d, y0, tg, ref.M).control
        for t_end in (ref.T_M, 0.5 * ref.T_M, ts.optimal_time):
            exact = control_distance(ctl, adj, t_end)
            quad = control_distance_quadrature(ctl, adj, t_end, nodes_per_block=16)
            assert exact == pytest.approx(quad, rel=1e-9)
        # against a random sampled control too
        P = rng.standard_normal(ctl.generators.shape)
        other = SampledControl(ctl.grid, P, d)
        assert control_distance(other, adj, ref.T_M) == pytest.approx(
            control_distance_quadrature(other, adj, ref.T_M, nodes_per_block=16), rel=1e-9)


def test_eta_set_density(eta_set, ref):
    assert eta_set.cutoff > 0
    h = ref.T_M / 50
    assert abs(eta_set.density(h) - 0.5) <= 0.02
    # brute-force measure from the interval list
    K = 100000
    total = 0.0
    for k in range(1, K + 1):
        lo, hi = ref.T_M / (k + 0.5), ref.T_M / k
        if lo >= h:
            continue
        total += min(hi, h) - lo
    # tail sum_{k > K} T (1/k - 1/(k + eta)) ~ T eta / (K + (1 + eta) / 2)
    total += ref.T_M * 0.5 / (K + 0.75)
    assert eta_set.measure_below(h) == pytest.approx(total, rel=1e-9)


def test_eta_set_membership(eta_set, ref):
    T = ref.T_M
    for k in (5, 12, 30):
        assert eta_set.contains(T / (k + 0.25))
        assert not eta_set.contains(T / k)
        assert not eta_set.contains(T / (k + 0.5))
        assert not eta_set.contains(T / (k + 0.75))
        assert eta_set.offset(T / (k + 0.25)) == pytest.approx(0.25, abs=1e-9)


def test_a_set_time_is_next_multiple(eta_set, ref):
    d, y0, tg = ref.domain, ref.y0, ref.target
    for k in (4, 10, 25):
        for a in (0.1, 0.25, 0.4):
            delta = ref.T_M / (k + a)
            assert eta_set.contains(delta)
            ts = optimal_time_sampled(d, y0, tg, ref.M, delta)
            assert ts.blocks == k + 1
            assert ts.optimal_time - ref.T_M == pytest.approx((1 - a) * delta, rel=1e-9)


def test_sweep_rows(eta_set, ref):
    d, y0, tg = ref.domain, ref.y0, ref.target
    deltas = [eta_set.sample_point(k) for k in (5, 9, 17)] + [ref.T_M / 7.8, ref.T_M / 13.6]
    rows = sweep(d, y0, tg, ref.M, deltas, eta_set=eta_set)
    for row in rows:
        assert row.error is None
        assert 0 <= row.T_gap <= 2 * row.delta
        assert row.norm_gap >= 0
        if row.in_A:
            assert 0.5 * row.delta < row.T_gap < row.delta
            assert row.ctrl_err_min_norm >= 0.5 * math.pi ** 3 * 0.5 * row.delta
    assert [r.in_A for r in rows] == [True, True, True, False, False]


def test_sweep_annotates_failures(ref):
    rows = sweep(ref.domain, ref.y0, ref.target, ref.M, [ref.t_exit / 1.5, ref.T_M / 10.25])
    assert "too coarse" in rows[0].error and rows[0].T_gap is None
    assert rows[1].error is None


def test_sweep_threads_deterministic(eta_set, ref):
    deltas = [eta_set.sample_point(k) for k in range(5, 13)]
    one = sweep(ref.domain, ref.y0, ref.target, ref.M, deltas, eta_set=eta_set, with_family=True)
    four = sweep(ref.domain, ref.y0, ref.target, ref.M, deltas, eta_set=eta_set, with_family=True, threads=4)
    assert [r.as_dict() for r in one] == [r.as_dict() for r in four]


def test_norm_gap_ladder_order(ref):
    rows = norm_gap_ladder(ref.domain, ref.y0, ref.target, ref.T_ref, levels=8)
    assert all(r.norm_gap >= 0 for r in rows)
    assert [r.k for r in rows] == [2 * 2 ** m for m in range(8)]
    slope, _, _ = fit_order(rows, "norm_gap")
    assert 1.8 <= slope <= 2.2


def test_family_members(ref, eta_set):
    d, y0, tg = ref.domain, ref.y0, ref.target
    delta = eta_set.sample_point(11)
    fam = build_optimal_family(d, y0, tg, ref.M, delta, n_members=7, T_M=ref.T_M)
    assert len(fam.members) == 7
    det = fam.details
    assert abs(det["orthogonality"]) < 1e-12
    assert det["b"] <= 0
    for u in fam.members:
        assert u.norm() <= ref.M + 1e-10
        assert np.linalg.norm(u.final_state(y0)) <= tg.radius + 1e-8
    # the beta = 0 member is the alpha-rescaled minimal-norm optimal control
    u_star = solve_jp_sampled(d, y0, tg, fam.members[0].grid).control
    assert np.allclose(fam.members[0].generators, det["alpha"] * u_star.generators, rtol=1e-12, atol=0)
    diffs = [(u + (-1.0) * fam.members[0]).norm() for u in fam.members]
    assert diffs[-1] == pytest.approx(fam.diameter_lower_bound, rel=1e-10)


def test_family_error_relations(ref, eta_set):
    from heatctl import optimal_time_distributed

    d, y0, tg = ref.domain, ref.y0, ref.target
    adj = optimal_time_distributed(d, y0, tg, ref.M).control
    delta = eta_set.sample_point(14)
    fam = build_optimal_family(d, y0, tg, ref.M, delta, T_M=ref.T_M)
    u_star = solve_jp_sampled(d, y0, tg, fam.members[0].grid).control
    err = family_vs_distributed_error(d, y0, tg, ref.M, delta, family=fam)
    ctrl = control_distance(u_star, adj, ref.T_M)
    alpha_term = (fam.details["alpha"] - 1) * u_star.norm()
    assert err >= fam.diameter_lower_bound - ctrl - alpha_term
    assert abs(control_distance(fam.members[0], adj, ref.T_M) - ctrl) <= alpha_term + 1e-12


def test_family_needs_block_inside_horizon(ref):
    from heatctl import solve_jp_continuous

    # a large budget puts T(M) below T*/2, so delta > T(M) is still admissible
    M = solve_jp_continuous(ref.domain, ref.y0, ref.target, 0.3 * ref.t_exit).norm
    with pytest.raises(ConstructionError):
        build_optimal_family(ref.domain, ref.y0, ref.target, M, 0.3 * ref.t_exit * 1.05)


def test_quadratic_gap_hunt(ref):
    hunt = quadratic_gap_hunt(ref.domain, ref.y0, ref.target, ref.M, range(6, 12), T_M=ref.T_M)
    assert all(dl is not None for dl, _ in hunt)
    ratios = np.array([g / dl ** 2 for dl, g in hunt])
    assert np.all(ratios > 0)
    assert ratios.max() / ratios.min() < 10
    for k, (dl, g) in zip(range(6, 12), hunt):
        assert dl > ref.T_M / (k + 1)
        assert g == pytest.approx((k + 1) * dl - ref.T_M, rel=1e-9, abs=1e-15)
        assert g / dl < 0.05
