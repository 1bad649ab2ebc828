"""Command line front end: ``heatctl {solve-norm,solve-time,sweep,verify,report}``.

Exit statuses: 0 ok, 1 verification failed, 2 configuration or precondition
error, 3 numerical failure.
"""
import argparse
import logging
import sys

import numpy as np

from . import acceptance, config as cfgmod
from .errorlab import (
    build_eta_set,
    control_distance_quadrature,
    find_delta0,
    fit_order,
    norm_gap_ladder,
    quadratic_gap_hunt,
    sweep,
)
from .errors import ConfigurationError, DomainError, HeatCtlError, NumericalError
from .gramians import SamplingGrid
from .minnorm import solve_jp_continuous, solve_jp_sampled
from .report import Report, metadata, render_text, verdict, write_outputs
from .spectral import BallTarget, build_domain, exit_time
from .timeopt import optimal_time_distributed, optimal_time_sampled

log = logging.getLogger("heatctl")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _problem(cfg):
    d = build_domain(cfg.L, cfg.a, cfg.b, cfg.J)
    y0 = cfg.state()
    target = BallTarget(cfg.r)
    return d, y0, target, exit_time(d, y0, target)


def _budgets(cfg, d, y0, target, t_exit):
    if cfg.M_list is not None:
        return [float(m) for m in cfg.M_list]
    if cfg.M is not None:
        return [float(cfg.M)]
    if cfg.M_exit_fraction is None:
        raise ConfigurationError("no budget given (problem.M, problem.M_list or problem.M_exit_fraction)", "problem.M")
    return [solve_jp_continuous(d, y0, target, cfg.M_exit_fraction * t_exit).norm]


def _solve_checks(label, sol, r, tol):
    zn = np.linalg.norm(sol.minimizer)
    fin = float(np.linalg.norm(sol.final_state + r * sol.minimizer / zn))
    val = abs(sol.value + 0.5 * sol.norm ** 2) / (0.5 * sol.norm ** 2)
    rad = abs(np.linalg.norm(sol.final_state) - r)
    return [
        verdict(f"{label}: Euler-Lagrange residual", tol, sol.euler_lagrange_residual,
                sol.euler_lagrange_residual <= tol),
        verdict(f"{label}: value law V = -N^2/2 (relative)", 1e-10, val, val <= 1e-10),
        verdict(f"{label}: final state = -r z*/||z*||", 1e-8, fin, fin <= 1e-8),
        verdict(f"{label}: ||final state|| = r", 1e-8, rad, rad <= 1e-8),
    ]


def run_solve_norm(cfg, timestamp=True):
    """Minimal-norm solves at each configured horizon (continuous T and/or sampled (delta, k))."""
    d, y0, target, t_exit = _problem(cfg)
    results, verdicts = {"exit_time": t_exit}, []
    horizons = cfg.T_list if cfg.T_list is not None else ([cfg.T] if cfg.T is not None else [])
    sampled = cfg.delta is not None and cfg.k is not None
    if not horizons and not sampled:
        if cfg.M_exit_fraction is None:
            raise ConfigurationError("need problem.T, problem.T_list or sampling.delta with sampling.k", "problem.T")
        horizons = [cfg.M_exit_fraction * t_exit]
    for T in horizons:
        sol = solve_jp_continuous(d, y0, target, float(T))
        label = f"T={T:.10g}"
        results[label] = {"N": sol.norm, "V": sol.value, "residual": sol.euler_lagrange_residual}
        verdicts += _solve_checks(label, sol, cfg.r, cfg.residual_tol)
    if sampled:
        sol = solve_jp_sampled(d, y0, target, SamplingGrid(cfg.delta, cfg.k), t_exit=t_exit)
        label = f"delta={cfg.delta:.10g},k={cfg.k}"
        results[label] = {"N": sol.norm, "V": sol.value, "residual": sol.euler_lagrange_residual}
        verdicts += _solve_checks(label, sol, cfg.r, cfg.residual_tol)
    meta = metadata("solve-norm", cfgmod.to_dict(cfg), timestamp)
    meta["results"] = results
    return Report(meta, [], {}, verdicts)


def run_solve_time(cfg, timestamp=True):
    """Optimal times T(M) and, when sampling.delta is set, T_delta(M) with the sandwich margins."""
    d, y0, target, t_exit = _problem(cfg)
    results, verdicts = {"exit_time": t_exit}, []
    for M in _budgets(cfg, d, y0, target, t_exit):
        ts = optimal_time_distributed(d, y0, target, M, tol=cfg.time_tol)
        entry = {"T": ts.optimal_time}
        if M == 0:
            gap = abs(ts.optimal_time - t_exit)
            verdicts.append(verdict(f"M=0: T(0) = T*", 0.0, gap, gap == 0.0))
        else:
            back = abs(solve_jp_continuous(d, y0, target, ts.optimal_time).norm - M) / M
            verdicts.append(verdict(f"M={M:.10g}: round trip N(T(M)) = M (relative)", 1e-8, back, back <= 1e-8))
        if cfg.delta is not None and M > 0:
            sts = optimal_time_sampled(d, y0, target, M, cfg.delta)
            entry.update({"T_delta": sts.optimal_time, "k": sts.blocks, "T_gap": sts.optimal_time - ts.optimal_time})
            if sts.sandwich is not None:
                lo, hi = sts.sandwich
                entry["sandwich"] = [lo, hi]
                verdicts.append(verdict(f"M={M:.10g}: sandwich N_d(T_d) <= M < N_d(T_d - d) (margins)", 0.0,
                                        [lo, hi], lo >= 0 and hi > 0))
            if sts.warnings:
                entry["warnings"] = list(sts.warnings)
        results[f"M={M:.10g}"] = entry
    meta = metadata("solve-time", cfgmod.to_dict(cfg), timestamp)
    meta["results"] = results
    return Report(meta, [], {}, verdicts)


def _fit(rows, name):
    s, c, r2 = fit_order(rows, name)
    n = sum(1 for r in rows if (r if isinstance(r, dict) else r.as_dict()).get(name))
    return {"slope": s, "intercept": c, "r2": r2, "n": n}


def run_error_lab(cfg, timestamp=True):
    """Sweep over a dyadic or explicit delta ladder plus the A-set samples, with order fits and the hunt."""
    d, y0, target, t_exit = _problem(cfg)
    M = _budgets(cfg, d, y0, target, t_exit)[0]
    T_M = optimal_time_distributed(d, y0, target, M, tol=cfg.time_tol).optimal_time
    eta_set = build_eta_set(d, y0, target, M, cfg.eta, cfg.k_values(), T_M=T_M)
    if cfg.deltas is not None:
        ladder = [float(x) for x in cfg.deltas]
    else:
        base = cfg.ladder_base if cfg.ladder_base is not None else t_exit / 3
        ladder = [base / 2 ** m for m in range(cfg.ladder_levels)]
    a_deltas = [eta_set.sample_point(k) for k in eta_set.k_values if eta_set.sample_point(k) < eta_set.cutoff]
    rows = sweep(d, y0, target, M, sorted(set(ladder) | set(a_deltas), reverse=True), eta_set=eta_set,
                 with_family=True, threads=cfg.threads, family_members=cfg.family_members)
    lam = d.lambda1
    verdicts, fits = [], {}
    failed = [r for r in rows if r.error]
    good = [r for r in rows if not r.error]
    a_rows = [r for r in good if r.in_A]

    try:
        delta0, _ = find_delta0(d, y0, target, M, [r.delta for r in rows])
    except HeatCtlError:
        delta0 = None
    below = [r for r in good if delta0 is not None and r.delta <= delta0]
    if below:
        m = min(min(r.T_gap + 1e-10, 2 * r.delta + 1e-10 - r.T_gap) for r in below)
        verdicts.append(verdict(f"0 <= T_d - T <= 2 delta on {len(below)} rows below delta0 (min margin)", 0.0, m,
                                m >= 0))
    if a_rows:
        lo = min(r.T_gap - (1 - cfg.eta) * r.delta for r in a_rows)
        hi = min(r.delta - r.T_gap for r in a_rows)
        verdicts.append(verdict(f"(1-eta) delta < T_d - T < delta on {len(a_rows)} A-set rows (min margins)", 0.0,
                                [lo, hi], lo > 0 and hi > 0))
        c = 0.5 * lam ** 1.5 * cfg.r * (1 - cfg.eta)
        m = min(r.ctrl_err_min_norm - c * r.delta for r in a_rows)
        verdicts.append(verdict("control error >= lambda1^{3/2} r (1-eta) delta / 2 on A (min margin)", 0.0, m,
                                m >= 0))
    neg = min((r.norm_gap for r in good), default=0.0)
    verdicts.append(verdict("norm gap N_d(T_d) - N(T_d) >= 0 (min)", 0.0, neg, neg >= -1e-12))

    matched = norm_gap_ladder(d, y0, target, T_M, levels=cfg.ladder_levels)
    windows = [
        ("norm_gap_matched", matched, "norm_gap", (1.8, 2.2)),
        ("ctrl_err_min_norm_A", a_rows, "ctrl_err_min_norm", (0.8, 1.2)),
        ("family_err_A", a_rows, "family_err", (0.4, 0.6)),
        ("beta_max_A", a_rows, "beta_max", (0.4, 0.6)),
    ]
    for key, src, field, (lo, hi) in windows:
        try:
            fits[key] = _fit(src, field)
        except ConfigurationError as exc:
            verdicts.append(verdict(f"{key} slope in [{lo}, {hi}]", [lo, hi], None, False, note=str(exc)))
            continue
        s = fits[key]["slope"]
        verdicts.append(verdict(f"{key} slope in [{lo}, {hi}]", [lo, hi], s, lo <= s <= hi))
    try:
        fits["ctrl_err_min_norm_all"] = _fit(good, "ctrl_err_min_norm")
    except ConfigurationError:
        pass

    # spot check of the analytic control distance against composite Gauss quadrature
    dist = optimal_time_distributed(d, y0, target, M, tol=cfg.time_tol).control
    worst = 0.0
    for r in a_rows[:: max(1, len(a_rows) // 3)][:3]:
        ctl = optimal_time_sampled(d, y0, target, M, r.delta).control
        quad = control_distance_quadrature(ctl, dist, T_M, nodes_per_block=cfg.quadrature_nodes)
        worst = max(worst, abs(quad - r.ctrl_err_min_norm) / quad)
    verdicts.append(verdict(f"control distance vs {cfg.quadrature_nodes}-node Gauss quadrature (relative)", 1e-9,
                            worst, worst <= 1e-9))

    hunt = quadratic_gap_hunt(d, y0, target, M, cfg.hunt_values(), T_M=T_M)
    found = [(dl, g) for dl, g in hunt if dl is not None]
    if found:
        ratios = [g / dl ** 2 for dl, g in found]
        med = float(np.median(ratios))
        m = max(g - 10 * med * dl ** 2 for dl, g in found)
        verdicts.append(verdict(f"hunt: T_gap <= 10 median(T_gap/delta^2) delta^2 on {len(found)} k (max excess)",
                                0.0, m, m <= 0 and len(found) == len(hunt)))
    meta = metadata("sweep", cfgmod.to_dict(cfg), timestamp)
    meta["results"] = {
        "exit_time": t_exit,
        "M": M,
        "T_M": T_M,
        "A_cutoff": eta_set.cutoff,
        "A_density_at_cutoff": eta_set.density(eta_set.cutoff),
        "delta0": delta0,
        "rows": len(rows),
        "row_errors": len(failed),
        "hunt": [[k, dl, g] for k, (dl, g) in zip(cfg.hunt_values(), hunt)],
    }
    meta["matched_ladder"] = [r.as_dict() for r in matched]
    return Report(meta, [r.as_dict() for r in rows], fits, verdicts)


def run_verify(seed=0, echo=print, timestamp=True):
    results = acceptance.run_all(seed=seed, echo=echo)
    verdicts = []
    for res in results:
        for v in res["verdicts"]:
            verdicts.append(dict(v, name=f"criterion {res['criterion']} ({res['name']}): {v['name']}"))
    meta = metadata("verify", {"run": {"seed": seed}}, timestamp)
    meta["results"] = {f"criterion {r['criterion']}": ("PASS" if r["pass"] else "FAIL") for r in results}
    complete = len(results) == len(acceptance.CRITERIA)
    if not complete:
        verdicts.append(verdict("all criteria executed", len(acceptance.CRITERIA), len(results), False))
    return Report(meta, [], {}, verdicts)


def build_parser():
    p = argparse.ArgumentParser(prog="heatctl", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration (defaults to the reference setup)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads for sweeps")
    common.add_argument("--seed", type=int, metavar="N", help="random seed")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-norm", parents=[common], help="minimal-norm controls")
    sub.add_parser("solve-time", parents=[common], help="optimal times")
    sub.add_parser("sweep", parents=[common], help="sampled vs distributed error sweep (CSV + JSON)")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    rp = sub.add_parser("report", parents=[common], help="render a JSON report as text")
    rp.add_argument("json", metavar="REPORT.json")
    return p


def _config(args):
    cfg = cfgmod.load(args.config) if args.config else cfgmod.validate(cfgmod.RunConfig())
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    return cfgmod.validate(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            with open(args.json, encoding="utf-8") as fh:
                report = Report.from_json(fh.read())
            sys.stdout.write(render_text(report))
            return EXIT_OK
        cfg = _config(args)
        if args.command == "verify":
            report = run_verify(cfg.seed)
            write_outputs(report, cfg.out_dir, "verify")
            return EXIT_OK if report.passed else EXIT_VERIFY
        runner = {"solve-norm": run_solve_norm, "solve-time": run_solve_time, "sweep": run_error_lab}[args.command]
        report = runner(cfg)
        stem = args.command.replace("-", "_")
        paths = write_outputs(report, cfg.out_dir, stem, report.rows if args.command == "sweep" else None)
        sys.stdout.write(render_text(report))
        for p in paths.values():
            print(f"wrote {p}")
        return EXIT_OK
    except (ConfigurationError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, HeatCtlError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
