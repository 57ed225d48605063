"""Command-line entry points: run, sweep, rate-curve, verify-equivalence, audit.

Every subcommand takes ``--config`` plus a few overrides. Exit code 0 means
the command (and any acceptance-style audit it performs) passed; a failed
audit or equivalence check exits nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import diagnostics, harness
from .oracles import make_oracle
from .optimizers import random_coefficient_config, verify_equivalence
from .schedules import eta_at


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["base_seed"] = args.seed
        overrides["oracle"] = replace(cfg.oracle, seed=args.seed)
    if getattr(args, "runs", None) is not None:
        overrides["n_runs"] = args.runs
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "optimizer", None) is not None:
        overrides["optimizer"] = args.optimizer
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    report = harness.run_experiment(cfg)
    print(f"{cfg.optimizer} on {cfg.oracle.kind}: {cfg.n_runs} run(s) x {cfg.n_iters} iterations")
    for key, stats in sorted(report.aggregate.items()):
        print(f"  {key}: {stats['mean']:.6g} +/- {stats['std']:.3g}")
    print(f"  traces -> {cfg.out_dir}  (wall time {report.wall_time:.2f}s)")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    grid = {}
    for item in args.grid:
        if "=" not in item:
            raise harness.ConfigError(f"grid item {item!r} must look like key=v1,v2,...")
        key, raw = item.split("=", 1)
        grid[key.strip()] = [float(v) for v in raw.split(",") if v.strip()]
    report = harness.sweep(cfg, grid, cap=args.cap)
    best = report.rows[report.best_index]
    print(f"swept {len(report.rows)} points; best by {report.metric}:")
    for key in grid:
        print(f"  {key} = {best[key]}")
    print(f"  {report.metric} = {best['metric_mean']:.6g} +/- {best['metric_std']:.3g}")
    if report.csv_path:
        print(f"  rows -> {report.csv_path}")
    return 0


def _cmd_rate_curve(args) -> int:
    cfg = _load(args)
    n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
    report = harness.emit_rate_curve(cfg, n_list, eta_c=args.eta_c)
    fit = diagnostics.rate_fit(report.n_values, report.mean_min_grad_sq, model=args.model)
    print("N, mean min grad^2, std, bound:")
    for n, m, s, r in zip(report.n_values, report.mean_min_grad_sq, report.std_min_grad_sq, report.rhs_bound):
        rhs = "-" if r is None else f"{r:.6g}"
        print(f"  {n}: {m:.6g} +/- {s:.3g}  (bound {rhs})")
    print(f"log-log slope vs N: {fit.slope:.4f} (r^2 against {fit.model}: {fit.r_squared:.4f})")
    if report.csv_path:
        print(f"curve -> {report.csv_path}")
    return 0


def _cmd_verify_equivalence(args) -> int:
    cfg = _load(args)
    oracle = make_oracle(replace(cfg.oracle, sigma=0.0))
    n_iters = args.iters or min(cfg.n_iters, 200)
    reports = [verify_equivalence(cfg.coefficients, oracle, n_iters, tol=args.tol, init_seed=cfg.base_seed)]
    rng = np.random.default_rng(cfg.base_seed)
    for _ in range(args.extra_configs):
        rand_cfg = random_coefficient_config(rng, cfg.oracle.d, eta=cfg.coefficients.eta)
        reports.append(verify_equivalence(rand_cfg, oracle, n_iters, tol=args.tol, init_seed=cfg.base_seed))
    worst = max(r.max_deviation for r in reports)
    ok = all(r.passed for r in reports)
    print(f"checked {len(reports)} config(s) over {n_iters} iterations")
    print(f"worst relative deviation: {worst:.3e} (tolerance {args.tol:.1e})")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_audit(args) -> int:
    cfg = _load(args)
    report = harness.run_experiment(cfg, write=False)
    oracle = make_oracle(cfg.oracle)
    try:
        audit_cfg = diagnostics.make_audit_config(report.results, oracle, cfg.coefficients)
    except diagnostics.ConfigError as exc:
        print(f"audit unavailable: {exc}")
        return 2
    audit = diagnostics.bound_audit(report.results, cfg.coefficients, audit_cfg)
    print(f"bound audit over {audit.n_runs} run(s), N = {audit.n_iters}:")
    print(f"  mean min grad^2 = {audit.mean_min_grad_sq:.6g} (std {audit.std_min_grad_sq:.3g})")
    kind = "empirical" if audit_cfg.K_is_empirical else "declared"
    print(f"  RHS = {audit.rhs:.6g}  (M_bar {audit_cfg.M_bar:.4g}, K {audit_cfg.K:.4g} {kind})")
    print(f"  {'PASS' if audit.passed else 'FAIL'}")
    ok = audit.passed
    if args.delta_prime is not None and cfg.n_runs >= 50:
        markov = diagnostics.markov_check(report.results, args.delta_prime, cfg.coefficients, audit_cfg)
        print(
            f"markov check (delta' = {markov.delta_prime}): fraction {markov.fraction:.3f} "
            f"within {markov.threshold:.6g} -> {'PASS' if markov.passed else 'FAIL'}"
        )
        ok = ok and markov.passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aammsu", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--runs", type=int, default=None, help="override n_runs")
        p.add_argument("--out", default=None, help="override out_dir")
        p.add_argument("--optimizer", default=None, choices=list(harness._OPTIMIZERS))

    p_run = sub.add_parser("run", help="run the experiment and write traces")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid-search coefficient knobs")
    common(p_sweep)
    p_sweep.add_argument("--grid", action="append", required=True, help="key=v1,v2,... (repeatable)")
    p_sweep.add_argument("--cap", type=int, default=256)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_rate = sub.add_parser("rate-curve", help="min grad^2 vs horizon N with eta = C/sqrt(N)")
    common(p_rate)
    p_rate.add_argument("--n-list", required=True, help="comma-separated horizons, e.g. 100,1000,10000")
    p_rate.add_argument("--eta-c", type=float, default=None)
    p_rate.add_argument("--model", default="inv_sqrt_n", choices=["inv_sqrt_n", "log_over_sqrt_n"])
    p_rate.set_defaults(func=_cmd_rate_curve)

    p_ver = sub.add_parser("verify-equivalence", help="replay one gradient stream through all formulations")
    common(p_ver)
    p_ver.add_argument("--iters", type=int, default=None)
    p_ver.add_argument("--tol", type=float, default=1e-9)
    p_ver.add_argument("--extra-configs", type=int, default=0, help="additional random configs to check")
    p_ver.set_defaults(func=_cmd_verify_equivalence)

    p_audit = sub.add_parser("audit", help="finite-horizon bound (and optional markov) audit")
    common(p_audit)
    p_audit.add_argument("--delta-prime", type=float, default=None)
    p_audit.set_defaults(func=_cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, diagnostics.ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
