"""Exit-criteria checks on the reference configuration.

Reference: L = 1, w = (0.25, 0.75), J = 64, y0 = 2 e1 + 0.5 e2, r = 1,
M = N(0.6 T*, y0), eta = 0.5. Each check returns a list of verdict records;
:func:`run_all` times them and aggregates one pass/fail entry per criterion.
"""
import math
import time
from dataclasses import dataclass

import numpy as np

from .errorlab import (
    build_eta_set,
    build_optimal_family,
    control_distance,
    find_delta0,
    fit_order,
    norm_gap_ladder,
    quadratic_gap_hunt,
    sweep,
)
from .gramians import SamplingGrid, TimeSignal, pythagoras_check, block_average
from .minnorm import solve_jp_continuous, solve_jp_sampled
from .report import verdict
from .spectral import BallTarget, build_domain, exit_time
from .timeopt import norm_lipschitz_check, optimal_time_distributed, optimal_time_sampled, time_lipschitz_check


@dataclass
class Reference:
    domain: object
    y0: np.ndarray
    target: BallTarget
    t_exit: float
    T_ref: float
    M: float
    T_M: float
    eta: float = 0.5
    k_range: tuple = tuple(range(3, 41))

    @property
    def lower_slope(self):
        # lambda_1^{3/2} r (1 - eta) / 2
        return 0.5 * self.domain.lambda1 ** 1.5 * self.target.radius * (1 - self.eta)


def reference_setup(J=64, L=1.0, omega=(0.25, 0.75), y0=(2.0, 0.5), r=1.0, exit_fraction=0.6, eta=0.5,
                    k_range=tuple(range(3, 41))):
    d = build_domain(L, omega[0], omega[1], J)
    y = np.zeros(J)
    y[: len(y0)] = y0
    target = BallTarget(r)
    t_exit = exit_time(d, y, target)
    T_ref = exit_fraction * t_exit
    M = solve_jp_continuous(d, y, target, T_ref).norm
    T_M = optimal_time_distributed(d, y, target, M).optimal_time
    return Reference(d, y, target, t_exit, T_ref, M, T_M, eta, tuple(k_range))


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def check_identities(ref, rng):
    d, y0, tg = ref.domain, ref.y0, ref.target
    out = []
    dual_err = pyth_err = 0.0
    for _ in range(100):
        grid = SamplingGrid(float(10 ** rng.uniform(-3, -1)), int(rng.integers(2, 11)))
        dim = 8
        fv = rng.standard_normal((grid.blocks * 8, dim))
        gv = rng.standard_normal((grid.blocks * 8, dim))
        f = TimeSignal.gauss(grid, lambda t: fv)
        g = TimeSignal.gauss(grid, lambda t: gv)
        fb, gb = block_average(f, grid), block_average(g, grid)
        scale = math.sqrt(f.norm_sq() * g.norm_sq())
        dual_err = max(dual_err, abs(fb.inner(g) - f.inner(gb)) / scale, abs(fb.inner(g) - fb.inner(gb)) / scale)
        full, avg, rest = pythagoras_check(f, grid)
        pyth_err = max(pyth_err, abs(full - avg - rest) / full)
    out.append(verdict("averaging duality <fbar,g> = <f,gbar> = <fbar,gbar> (relative)", 1e-12, dual_err,
                       dual_err <= 1e-12))
    out.append(verdict("Pythagoras ||f||^2 = ||fbar||^2 + ||f-fbar||^2 (relative)", 1e-12, pyth_err,
                       pyth_err <= 1e-12))

    sols = [solve_jp_continuous(d, y0, tg, f * ref.t_exit) for f in np.linspace(0.1, 0.9, 9)]
    for n in (5, 10, 20, 50, 100, 200):
        delta = ref.t_exit / n
        for k in sorted({2, n // 2, n - 1}):
            if k >= 2 and k * delta < ref.t_exit:
                sols.append(solve_jp_sampled(d, y0, tg, SamplingGrid(delta, k), t_exit=ref.t_exit))
    r = tg.radius
    res = max(s.euler_lagrange_residual for s in sols)
    val = max(_rel(s.value, -0.5 * s.norm ** 2) for s in sols)
    fin = max(np.linalg.norm(s.final_state + r * s.minimizer / np.linalg.norm(s.minimizer)) for s in sols)
    rad = max(_rel(np.linalg.norm(s.final_state), r) for s in sols)
    out.append(verdict(f"Euler-Lagrange residual on {len(sols)} solves", 1e-10, res, res <= 1e-10))
    out.append(verdict("value law V = -N^2/2 (relative)", 1e-10, val, val <= 1e-10))
    out.append(verdict("final state = -r z*/||z*||", 1e-8, fin, fin <= 1e-8))
    out.append(verdict("||final state|| = r (relative)", 1e-8, rad, rad <= 1e-8))
    return out


def check_equivalence(ref, rng):
    d, y0, tg = ref.domain, ref.y0, ref.target
    out = []
    worst_t = 0.0
    for T in rng.uniform(0.2, 0.8, 20) * ref.t_exit:
        N = solve_jp_continuous(d, y0, tg, T).norm
        worst_t = max(worst_t, _rel(optimal_time_distributed(d, y0, tg, N).optimal_time, T))
    out.append(verdict("round trip T(N(T)) = T on 20 points (relative)", 1e-8, worst_t, worst_t <= 1e-8))

    m_lo = solve_jp_continuous(d, y0, tg, 0.8 * ref.t_exit).norm
    m_hi = solve_jp_continuous(d, y0, tg, 0.2 * ref.t_exit).norm
    worst_m = 0.0
    for M in rng.uniform(m_lo, m_hi, 20):
        T = optimal_time_distributed(d, y0, tg, M).optimal_time
        worst_m = max(worst_m, _rel(solve_jp_continuous(d, y0, tg, T).norm, M))
    out.append(verdict("round trip N(T(M)) = M on 20 points (relative)", 1e-8, worst_m, worst_m <= 1e-8))

    grid = np.linspace(0.02, 0.98, 50) * ref.t_exit
    Ns = np.array([solve_jp_continuous(d, y0, tg, T).norm for T in grid])
    steps = np.diff(Ns)
    out.append(verdict("N strictly decreasing on a 50-point grid (max step)", 0.0, float(steps.max()),
                       bool(np.all(steps < 0))))

    worst = math.inf
    for _ in range(20):
        M = rng.uniform(m_lo, m_hi)
        delta = ref.t_exit / 10 ** rng.uniform(math.log10(20), math.log10(400))
        ts = optimal_time_sampled(d, y0, tg, M, delta)
        lower, upper = ts.sandwich
        worst = min(worst, lower, upper)
    out.append(verdict("sandwich N_d(T_d) <= M < N_d(T_d - d) on 20 random (M, delta): min margin", 0.0, worst,
                       worst >= 0.0))
    return out


def check_time_bracket(ref, rng=None):
    d, y0, tg = ref.domain, ref.y0, ref.target
    out = []
    candidates = np.geomspace(ref.t_exit / 2.2, ref.t_exit / 400, 30)
    delta0, _ = find_delta0(d, y0, tg, ref.M, candidates)
    ladder = np.geomspace(0.98 * delta0, delta0 / 50, 40)
    rows = sweep(d, y0, tg, ref.M, ladder)
    errors = [r.error for r in rows if r.error]
    worst = min(min(r.T_gap + 1e-10, 2 * r.delta + 1e-10 - r.T_gap) for r in rows if r.error is None)
    out.append(verdict("0 <= T_d - T <= 2 delta on 40-point ladder (min margin)", 0.0, worst,
                       worst >= 0 and not errors, delta0=delta0, errors=len(errors)))
    eta_set = build_eta_set(d, y0, tg, ref.M, ref.eta, ref.k_range, T_M=ref.T_M)
    a_deltas = [eta_set.sample_point(k) for k in ref.k_range if eta_set.sample_point(k) < eta_set.cutoff]
    a_rows = sweep(d, y0, tg, ref.M, a_deltas, eta_set=eta_set) + [r for r in rows if eta_set.contains(r.delta)]
    a_rows = [r for r in a_rows if r.in_A]
    lo = min(r.T_gap - (1 - ref.eta) * r.delta for r in a_rows)
    hi = min(r.delta - r.T_gap for r in a_rows)
    out.append(verdict(f"(1-eta) delta < T_d - T < delta on {len(a_rows)} A-set rows (min margins)", 0.0,
                       [lo, hi], lo > 0 and hi > 0, cutoff=eta_set.cutoff))
    return out


def _a_set_rows(ref, with_family=True):
    d, y0, tg = ref.domain, ref.y0, ref.target
    eta_set = build_eta_set(d, y0, tg, ref.M, ref.eta, ref.k_range, T_M=ref.T_M)
    deltas = [eta_set.sample_point(k) for k in ref.k_range if eta_set.sample_point(k) < eta_set.cutoff]
    return eta_set, sweep(d, y0, tg, ref.M, deltas, eta_set=eta_set, with_family=with_family)


def check_orders(ref, rng=None):
    d, y0, tg = ref.domain, ref.y0, ref.target
    out = []
    ladder = norm_gap_ladder(d, y0, tg, ref.T_ref, levels=10)
    s, _, r2 = fit_order(ladder, "norm_gap")
    out.append(verdict("norm gap order on 10-level dyadic ladder", [1.8, 2.2], s, 1.8 <= s <= 2.2, r2=r2))
    _, rows = _a_set_rows(ref)
    s1, _, r2 = fit_order(rows, "ctrl_err_min_norm")
    out.append(verdict("minimal-norm control error order on A", [0.8, 1.2], s1, 0.8 <= s1 <= 1.2, r2=r2))
    margin = min(r.ctrl_err_min_norm - ref.lower_slope * r.delta for r in rows)
    out.append(verdict("control error >= lambda1^{3/2} r (1-eta) delta / 2 row-wise (min margin)", 0.0, margin,
                       margin >= 0))
    s2, _, r2 = fit_order(rows, "family_err")
    out.append(verdict("family control error order on A", [0.4, 0.6], s2, 0.4 <= s2 <= 0.6, r2=r2))
    return out


def check_lipschitz(ref, rng):
    d, y0, tg = ref.domain, ref.y0, ref.target
    out = []
    worst = math.inf
    for _ in range(20):
        T1, T2 = np.sort(rng.uniform(0.05, 0.95, 2)) * ref.t_exit
        lower, diff, _ = norm_lipschitz_check(d, y0, tg, T1, T2)
        worst = min(worst, diff - lower + 1e-8)
    out.append(verdict("lambda1^{3/2} r (T2-T1) <= N(T1) - N(T2) on 20 pairs (min margin)", 0.0, worst, worst >= 0))
    worst = math.inf
    for _ in range(20):
        pert = rng.standard_normal(d.modes) * np.exp(-0.2 * np.arange(d.modes))
        pert *= 10 ** rng.uniform(-3, -1) / np.linalg.norm(pert)
        gap, bound = time_lipschitz_check(d, y0, y0 + pert, tg, ref.M)
        worst = min(worst, bound + 1e-8 - gap)
    out.append(verdict("|T(M,y1) - T(M,y2)| <= ||y1-y2|| / (lambda1 r) on 20 perturbations (min margin)", 0.0,
                       worst, worst >= 0))
    return out


def check_family(ref, rng=None):
    d, y0, tg = ref.domain, ref.y0, ref.target
    out = []
    eta_set, rows = _a_set_rows(ref, with_family=False)
    budget = target = -math.inf
    fam_rows = []
    count = 0
    for row in rows:
        fam = build_optimal_family(d, y0, tg, ref.M, row.delta, T_M=ref.T_M)
        for u in fam.members:
            count += 1
            budget = max(budget, u.norm() - ref.M)
            target = max(target, np.linalg.norm(u.final_state(y0)) - tg.radius)
        fam_rows.append({"delta": row.delta, "beta_max": fam.diameter_lower_bound})
    out.append(verdict(f"budget ||u|| <= M on {count} family members (max excess)", 1e-10, budget, budget <= 1e-10))
    out.append(verdict(f"target ||y(T_d)|| <= r on {count} family members (max excess)", 1e-8, target,
                       target <= 1e-8))
    s, _, r2 = fit_order(fam_rows, "beta_max")
    out.append(verdict("diameter lower bound beta_max order on A", [0.4, 0.6], s, 0.4 <= s <= 0.6, r2=r2))
    return out


def check_quadratic_hunt(ref, rng=None, ks=range(6, 12)):
    d, y0, tg = ref.domain, ref.y0, ref.target
    out = []
    hunt = quadratic_gap_hunt(d, y0, tg, ref.M, ks, T_M=ref.T_M)
    found = [(dl, g) for dl, g in hunt if dl is not None]
    out.append(verdict(f"delta found for each of {len(list(ks))} consecutive k", len(list(ks)), len(found),
                       len(found) == len(list(ks))))
    if not found:
        return out
    ratios = np.array([g / dl ** 2 for dl, g in found])
    med = float(np.median(ratios))
    worst = max(g - 10 * med * dl ** 2 for dl, g in found)
    out.append(verdict("T_gap <= 10 median(T_gap/delta^2) delta^2 (max excess)", 0.0, worst, worst <= 0,
                       median_ratio=med, ratios=ratios.tolist()))
    lin = [g / dl for dl, g in found]
    out.append(verdict("T_gap/delta far below 1 - eta off A (max)", 1 - ref.eta, max(lin),
                       max(lin) < (1 - ref.eta) and bool(np.all(np.diff(lin) < 0))))
    return out


def check_truncation(ref, rng=None):
    d, y0, tg = ref.domain, ref.y0, ref.target
    fine = build_domain(d.length, d.omega[0], d.omega[1], 2 * d.modes)
    y_fine = np.zeros(fine.modes)
    y_fine[: d.modes] = y0
    n1 = solve_jp_continuous(d, y0, tg, ref.T_ref).norm
    n2 = solve_jp_continuous(fine, y_fine, tg, ref.T_ref).norm
    rel = _rel(n1, n2)
    return [verdict(f"N(T_ref) change from J={d.modes} to J={fine.modes} (relative)", 1e-9, rel, rel < 1e-9)]


CRITERIA = [
    (8, "truncation gate", check_truncation, 30.0),
    (1, "identity suite", check_identities, 10.0),
    (2, "equivalence suite", check_equivalence, 30.0),
    (3, "time-gap bracket", check_time_bracket, 120.0),
    (4, "order fits", check_orders, 300.0),
    (5, "Lipschitz suite", check_lipschitz, 60.0),
    (6, "constructive family", check_family, 120.0),
    (7, "quadratic time-gap witness", check_quadratic_hunt, 120.0),
]


def run_criterion(number, ref=None, seed=0):
    for num, name, fn, budget in CRITERIA:
        if num == number:
            break
    else:
        raise KeyError(number)
    ref = ref or reference_setup()
    rng = np.random.default_rng([seed, number])
    t0 = time.perf_counter()
    verdicts = fn(ref, rng)
    elapsed = time.perf_counter() - t0
    verdicts.append(verdict(f"runtime (s)", budget, elapsed, elapsed < budget))
    return {"criterion": num, "name": name, "pass": all(v["pass"] for v in verdicts), "runtime": elapsed,
            "verdicts": verdicts}


def run_all(seed=0, numbers=None, echo=None):
    """Run the criteria (truncation gate first); abort after a failed gate."""
    ref = reference_setup()
    results = []
    for num, name, _, _ in CRITERIA:
        if numbers is not None and num not in numbers:
            continue
        res = run_criterion(num, ref, seed)
        results.append(res)
        if echo:
            echo(f"[{'PASS' if res['pass'] else 'FAIL'}] criterion {num}: {name} ({res['runtime']:.2f} s)")
        if num == 8 and not res["pass"]:
            if echo:
                echo(f"truncation diagnostic: {res['verdicts'][0]}; remaining criteria skipped")
            break
    return results
