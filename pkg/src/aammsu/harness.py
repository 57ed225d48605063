"""Experiment runner: flat-file configs, seeded multi-run execution, CSV/JSON output.

The config file is flat ``key = value`` text (``#`` starts a comment, blank
values mean "unset"); ``load_config`` validates every schedule constraint with
a message naming the violated condition. Runs are deterministic: run k uses
seed base_seed + k for its noise stream and initial point, and identical
(config, base_seed) pairs produce byte-identical trace CSVs. Wall-clock time
is therefore reported on the console only, never persisted.

Outputs per experiment: ``trace_<run>.csv`` (one row per iteration),
``aggregate.json`` (schema-versioned mean/std of every summary metric),
plus ``sweep.csv`` / ``rate_curve.csv`` for the grid and rate drivers.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
import os
import time
from bisect import bisect_right
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .oracles import (
    DatasetParams,
    LogisticOracle,
    OracleSpec,
    accuracy,
    generate_dataset,
    make_oracle,
)
from .optimizers import RunResult, make_optimizer, run_steps
from .schedules import (
    CoefficientConfig,
    Constant,
    Decreasing,
    EtaSchedule,
    FiniteHorizon,
    alpha_cap,
    eta_at,
)
from .vectors import DomainError

SCHEMA_VERSION = 1
TRACE_COLUMNS = ("n", "loss", "grad_norm_sq", "min_grad_sq", "eta", "alpha_mean", "alpha_max")
_INIT_TAG = 2
_OPTIMIZERS = ("sagm", "ahbm", "aammsu_raw", "sutskever", "amsgrad")


class ConfigError(ValueError):
    """Config file rejected; the message names the violated condition."""


@dataclass(frozen=True)
class ExperimentConfig:
    optimizer: str
    oracle: OracleSpec
    coefficients: CoefficientConfig
    n_iters: int
    n_runs: int
    base_seed: int
    lr_milestones: tuple[int, ...] = ()
    lr_factor: float = 1.0
    out_dir: str = "out"
    init: str = "gauss"  # zeros | ones | gauss
    init_scale: float = 1.0
    beta1: float = 0.9  # amsgrad first-moment rate
    strict_alpha_cap: bool = False

    def __post_init__(self):
        if self.optimizer not in _OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {_OPTIMIZERS}, got {self.optimizer!r}")
        if self.n_iters < 1:
            raise ConfigError("n_iters >= 1 required")
        if self.n_runs < 1:
            raise ConfigError("n_runs >= 1 required")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be nonnegative")
        if list(self.lr_milestones) != sorted(set(self.lr_milestones)) or any(
            m < 1 for m in self.lr_milestones
        ):
            raise ConfigError("lr_milestones must be strictly increasing positive iterations")
        if not 0.0 < self.lr_factor <= 1.0:
            raise ConfigError("lr_factor in (0, 1] required")
        if self.init not in ("zeros", "ones", "gauss"):
            raise ConfigError("init must be zeros | ones | gauss")
        if not 0.0 <= self.beta1 < 1.0:
            raise ConfigError("beta1 in [0, 1) required")


# ---------------------------------------------------------------------------
# flat config file format

_KEYS = {
    # experiment
    "optimizer": str,
    "n_iters": int,
    "n_runs": int,
    "base_seed": int,
    "out_dir": str,
    "init": str,
    "init_scale": float,
    "beta1": float,
    "strict_alpha_cap": bool,
    "lr_milestones": "int_list",
    "lr_factor": float,
    # oracle
    "oracle": str,
    "dim": int,
    "sigma": float,
    "problem_seed": int,
    "grad_bound": "opt_float",
    "eig_min": float,
    "eig_max": float,
    "n_samples": int,
    "batch_size": "opt_int",
    "class_sep": float,
    "csv_path": "opt_str",
    # coefficients
    "M": float,
    "mu": float,
    "nu": float,
    "gamma_tilde": float,
    "beta2": float,
    "epsilon": float,
    "B": float,
    "dim_scaled_B": bool,
    "eta": str,  # constant | finite_horizon | decreasing
    "eta_value": float,
    "eta_c": float,
    "eta_horizon": "opt_int",
}

_DEFAULTS = {
    "optimizer": "sutskever",
    "n_iters": 1000,
    "n_runs": 1,
    "base_seed": 0,
    "out_dir": "out",
    "init": "gauss",
    "init_scale": 1.0,
    "beta1": 0.9,
    "strict_alpha_cap": False,
    "lr_milestones": (),
    "lr_factor": 1.0,
    "oracle": "quadratic",
    "dim": 10,
    "sigma": 0.0,
    "problem_seed": 0,
    "grad_bound": None,
    "eig_min": 0.5,
    "eig_max": 2.0,
    "n_samples": 400,
    "batch_size": None,
    "class_sep": 3.0,
    "csv_path": None,
    "M": 0.75,
    "mu": 0.5,
    "nu": 0.5,
    "gamma_tilde": 0.75,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "B": 1.0,
    "dim_scaled_B": False,
    "eta": "constant",
    "eta_value": 1e-3,
    "eta_c": 1.0,
    "eta_horizon": None,
}


def _parse_value(key: str, raw: str):
    kind = _KEYS[key]
    raw = raw.strip()
    if raw == "" or raw.lower() == "none":
        if kind in ("opt_float", "opt_int", "opt_str") or key == "lr_milestones":
            return () if key == "lr_milestones" else None
        raise ConfigError(f"key {key!r} needs a value")
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int or kind == "opt_int":
            return int(raw)
        if kind is float or kind == "opt_float":
            return float(raw)
        if kind == "int_list":
            return tuple(int(part) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def _build_eta(values: dict, n_iters: int) -> EtaSchedule:
    name = values["eta"]
    if name == "constant":
        return Constant(values["eta_value"])
    if name == "finite_horizon":
        horizon = values["eta_horizon"] or n_iters
        return FiniteHorizon(values["eta_c"], horizon)
    if name == "decreasing":
        return Decreasing(values["eta_c"])
    raise ConfigError("eta must be constant | finite_horizon | decreasing")


def config_from_values(values: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a flat key/value mapping."""
    merged = dict(_DEFAULTS)
    for key, val in values.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = val
    try:
        coefficients = CoefficientConfig(
            d=merged["dim"],
            M=merged["M"],
            mu=merged["mu"],
            nu=merged["nu"],
            gamma_tilde=merged["gamma_tilde"],
            beta2=merged["beta2"],
            epsilon=merged["epsilon"],
            eta=_build_eta(merged, merged["n_iters"]),
            B=merged["B"],
            dim_scaled_B=merged["dim_scaled_B"],
        )
        oracle_spec = OracleSpec(
            kind=merged["oracle"],
            d=merged["dim"],
            sigma=merged["sigma"],
            seed=merged["base_seed"],
            problem_seed=merged["problem_seed"],
            grad_bound=merged["grad_bound"],
            eig_min=merged["eig_min"],
            eig_max=merged["eig_max"],
            n_samples=merged["n_samples"],
            batch_size=merged["batch_size"],
            class_sep=merged["class_sep"],
            csv_path=merged["csv_path"],
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(
        optimizer=merged["optimizer"],
        oracle=oracle_spec,
        coefficients=coefficients,
        n_iters=merged["n_iters"],
        n_runs=merged["n_runs"],
        base_seed=merged["base_seed"],
        lr_milestones=tuple(merged["lr_milestones"]),
        lr_factor=merged["lr_factor"],
        out_dir=merged["out_dir"],
        init=merged["init"],
        init_scale=merged["init_scale"],
        beta1=merged["beta1"],
        strict_alpha_cap=merged["strict_alpha_cap"],
    )


def load_config(path: str) -> ExperimentConfig:
    """Parse a flat key = value config file."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {body!r}")
            key, raw = body.split("=", 1)
            key = key.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(key, raw)
    return config_from_values(values)


def config_values(cfg: ExperimentConfig) -> dict:
    """Flatten an ExperimentConfig back into the file's key space."""
    sched = cfg.coefficients.eta
    if isinstance(sched, Constant):
        eta_kind, eta_value, eta_c, eta_h = "constant", sched.value, _DEFAULTS["eta_c"], None
    elif isinstance(sched, FiniteHorizon):
        eta_kind, eta_value, eta_c, eta_h = "finite_horizon", _DEFAULTS["eta_value"], sched.c, sched.horizon
    else:
        eta_kind, eta_value, eta_c, eta_h = "decreasing", _DEFAULTS["eta_value"], sched.c, None
    return {
        "optimizer": cfg.optimizer,
        "n_iters": cfg.n_iters,
        "n_runs": cfg.n_runs,
        "base_seed": cfg.base_seed,
        "out_dir": cfg.out_dir,
        "init": cfg.init,
        "init_scale": cfg.init_scale,
        "beta1": cfg.beta1,
        "strict_alpha_cap": cfg.strict_alpha_cap,
        "lr_milestones": cfg.lr_milestones,
        "lr_factor": cfg.lr_factor,
        "oracle": cfg.oracle.kind,
        "dim": cfg.oracle.d,
        "sigma": cfg.oracle.sigma,
        "problem_seed": cfg.oracle.problem_seed,
        "grad_bound": cfg.oracle.grad_bound,
        "eig_min": cfg.oracle.eig_min,
        "eig_max": cfg.oracle.eig_max,
        "n_samples": cfg.oracle.n_samples,
        "batch_size": cfg.oracle.batch_size,
        "class_sep": cfg.oracle.class_sep,
        "csv_path": cfg.oracle.csv_path,
        "M": cfg.coefficients.M,
        "mu": cfg.coefficients.mu,
        "nu": cfg.coefficients.nu,
        "gamma_tilde": cfg.coefficients.gamma_tilde,
        "beta2": cfg.coefficients.beta2,
        "epsilon": cfg.coefficients.epsilon,
        "B": cfg.coefficients.B,
        "dim_scaled_B": cfg.coefficients.dim_scaled_B,
        "eta": eta_kind,
        "eta_value": eta_value,
        "eta_c": eta_c,
        "eta_horizon": eta_h,
    }


def save_config(cfg: ExperimentConfig, path: str):
    """Write the canonical flat form; save(load(p)) is byte-stable."""
    values = config_values(cfg)
    lines = []
    for key in _KEYS:
        val = values[key]
        if val is None:
            rendered = ""
        elif isinstance(val, tuple):
            rendered = ",".join(str(v) for v in val)
        elif isinstance(val, bool):
            rendered = "true" if val else "false"
        elif isinstance(val, float):
            rendered = repr(val)
        else:
            rendered = str(val)
        lines.append(f"{key} = {rendered}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# single runs


def _decay_multipliers(milestones: tuple[int, ...], factor: float) -> list[float]:
    mults = [1.0]
    for _ in milestones:
        mults.append(mults[-1] * factor)
    return mults


def make_eta_for(cfg: ExperimentConfig):
    """Compose the base schedule with the multi-step decay (applied at, not after, each milestone)."""
    mults = _decay_multipliers(cfg.lr_milestones, cfg.lr_factor)
    milestones = cfg.lr_milestones
    coeffs = cfg.coefficients

    def eta_for(n: int) -> float:
        return eta_at(coeffs, n) * mults[bisect_right(milestones, n)]

    return eta_for


def initial_point(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    d = cfg.oracle.d
    if cfg.init == "zeros":
        return np.zeros(d)
    if cfg.init == "ones":
        return cfg.init_scale * np.ones(d)
    rng = np.random.default_rng([seed, _INIT_TAG])
    return cfg.init_scale * rng.standard_normal(d)


def run_single(cfg: ExperimentConfig, run_index: int, base_oracle=None, record_full: bool = False) -> RunResult:
    """One seeded run: seed = base_seed + run_index."""
    seed = cfg.base_seed + run_index
    oracle = (base_oracle or make_oracle(cfg.oracle)).with_seed(seed)
    theta0 = initial_point(cfg, seed)
    opt = make_optimizer(cfg.optimizer, cfg.coefficients, theta0, beta1=cfg.beta1)
    cap = None
    if cfg.strict_alpha_cap:
        if getattr(oracle, "lipschitz", None) is None:
            raise ConfigError("strict_alpha_cap needs an oracle with a declared Lipschitz constant")
        cap = alpha_cap(cfg.coefficients, oracle.lipschitz)
    return run_steps(
        opt,
        oracle,
        cfg.n_iters,
        eta_for=make_eta_for(cfg),
        record_full=record_full,
        alpha_cap_value=cap,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# aggregation


def _mean_std(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(np.mean(arr)), "std": float(np.std(arr))}


def _run_summary(cfg: ExperimentConfig, result: RunResult, oracle) -> dict:
    summary = {
        "seed": result.seed,
        "final_loss": result.final_loss,
        "final_grad_sq": result.final_grad_sq,
        "min_grad_sq": result.min_grad_sq,
        "g_norm_max": result.g_norm_max,
    }
    if isinstance(oracle, LogisticOracle):
        data = oracle.dataset
        theta = result.final_theta
        summary["train_acc"] = accuracy(data.train_features, data.train_labels, theta)
        summary["val_acc"] = accuracy(data.val_features, data.val_labels, theta)
        if data.params is not None:
            test = generate_dataset(data.params, (data.seed or 0) + 1)
            summary["test_acc"] = accuracy(test.features, test.labels, theta)
    return summary


@dataclass
class ExperimentReport:
    cfg: ExperimentConfig
    results: list[RunResult]
    summaries: list[dict]
    aggregate: dict
    trace_paths: list[str] = field(default_factory=list)
    wall_time: float = 0.0  # console-only; never persisted


def aggregate_metrics(summaries: list[dict]) -> dict:
    keys = [k for k in summaries[0] if k != "seed"]
    return {k: _mean_std([s[k] for s in summaries]) for k in keys}


def run_experiment(cfg: ExperimentConfig, write: bool = True, record_full: bool = False) -> ExperimentReport:
    """Execute n_runs seeded runs and aggregate mean/std of every summary metric."""
    started = time.perf_counter()
    base_oracle = make_oracle(cfg.oracle)
    results, summaries = [], []
    for k in range(cfg.n_runs):
        result = run_single(cfg, k, base_oracle=base_oracle, record_full=record_full)
        oracle_k = base_oracle.with_seed(cfg.base_seed + k)
        results.append(result)
        summaries.append(_run_summary(cfg, result, oracle_k))
    report = ExperimentReport(
        cfg=cfg,
        results=results,
        summaries=summaries,
        aggregate=aggregate_metrics(summaries),
        wall_time=time.perf_counter() - started,
    )
    if write:
        _write_experiment(report)
    return report


def _format_float(x: float) -> str:
    return repr(float(x))


def write_trace_csv(path: str, result: RunResult):
    rows = []
    for i in range(result.n_iters):
        rows.append(
            (
                str(i + 1),
                _format_float(result.loss[i]),
                _format_float(result.grad_sq[i]),
                _format_float(result.running_min[i]),
                _format_float(result.eta[i]),
                _format_float(result.alpha_mean[i]),
                _format_float(result.alpha_max[i]),
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_experiment(report: ExperimentReport):
    cfg = report.cfg
    os.makedirs(cfg.out_dir, exist_ok=True)
    for k, result in enumerate(report.results):
        path = os.path.join(cfg.out_dir, f"trace_{k:03d}.csv")
        write_trace_csv(path, result)
        report.trace_paths.append(path)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "optimizer": cfg.optimizer,
        "oracle": cfg.oracle.kind,
        "n_iters": cfg.n_iters,
        "n_runs": cfg.n_runs,
        "base_seed": cfg.base_seed,
        "metrics": report.aggregate,
        "runs": report.summaries,
    }
    with open(os.path.join(cfg.out_dir, "aggregate.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# grid sweep


_SWEEP_KEYS = ("M", "mu", "nu", "gamma_tilde", "beta2", "epsilon", "eta_value", "eta_c", "beta1")


def _apply_point(cfg: ExperimentConfig, point: dict) -> ExperimentConfig:
    coeff_kwargs = {}
    exp_kwargs = {}
    for key, val in point.items():
        if key == "beta1":
            exp_kwargs["beta1"] = val
        elif key == "eta_value":
            coeff_kwargs["eta"] = Constant(val)
        elif key == "eta_c":
            sched = cfg.coefficients.eta
            if isinstance(sched, FiniteHorizon):
                coeff_kwargs["eta"] = FiniteHorizon(val, sched.horizon)
            elif isinstance(sched, Decreasing):
                coeff_kwargs["eta"] = Decreasing(val)
            else:
                raise ConfigError("eta_c sweeps need a finite_horizon or decreasing schedule")
        else:
            coeff_kwargs[key] = val
    coefficients = replace(cfg.coefficients, **coeff_kwargs) if coeff_kwargs else cfg.coefficients
    return replace(cfg, coefficients=coefficients, **exp_kwargs)


@dataclass
class SweepReport:
    rows: list[dict]
    best_index: int
    metric: str
    csv_path: str | None = None


def sweep(cfg: ExperimentConfig, grid: dict[str, list], cap: int = 256, write: bool = True) -> SweepReport:
    """Cartesian grid over coefficient knobs; best point by validation-metric mean.

    Logistic problems select the highest validation-accuracy mean; everything
    else selects the lowest mean min grad^2. Ties break toward the lower
    standard deviation.
    """
    if not grid:
        raise ConfigError("sweep needs a nonempty grid")
    for key in grid:
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"sweep key {key!r} not supported; choose from {_SWEEP_KEYS}")
    names = list(grid)
    combos = list(itertools.product(*(grid[name] for name in names)))
    if len(combos) > cap:
        raise ConfigError(f"grid size {len(combos)} exceeds the cap {cap}")
    logistic = cfg.oracle.kind in ("logistic", "csv")
    metric = "val_acc" if logistic else "min_grad_sq"
    rows = []
    for combo in combos:
        point = dict(zip(names, combo))
        report = run_experiment(_apply_point(cfg, point), write=False)
        row = dict(point)
        row["metric_mean"] = report.aggregate[metric]["mean"]
        row["metric_std"] = report.aggregate[metric]["std"]
        for key, stats in report.aggregate.items():
            row[f"{key}_mean"] = stats["mean"]
            row[f"{key}_std"] = stats["std"]
        rows.append(row)
    sign = 1.0 if logistic else -1.0
    best_index = max(
        range(len(rows)),
        key=lambda i: (sign * rows[i]["metric_mean"], -rows[i]["metric_std"]),
    )
    csv_path = None
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        csv_path = os.path.join(cfg.out_dir, "sweep.csv")
        header = list(rows[0])
        with open(csv_path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_format_float(row[h]) if isinstance(row[h], float) else str(row[h]) for h in header) + "\n")
    return SweepReport(rows=rows, best_index=best_index, metric=metric, csv_path=csv_path)


# ---------------------------------------------------------------------------
# rate curve


@dataclass
class RateCurveReport:
    n_values: list[int]
    mean_min_grad_sq: list[float]
    std_min_grad_sq: list[float]
    rhs_bound: list[float | None]
    csv_path: str | None = None


def emit_rate_curve(cfg: ExperimentConfig, n_list, eta_c: float | None = None, write: bool = True) -> RateCurveReport:
    """Run the experiment at each horizon N with eta = C/sqrt(N), plus the bound column."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise ConfigError("rate curve needs >= 3 horizon values")
    if eta_c is None:
        sched = cfg.coefficients.eta
        if isinstance(sched, (FiniteHorizon, Decreasing)):
            eta_c = sched.c
        else:
            raise ConfigError("rate curve needs eta_c (or a C-based schedule in the config)")
    means, stds, bounds = [], [], []
    for n in n_list:
        point_cfg = replace(
            cfg,
            n_iters=n,
            coefficients=replace(cfg.coefficients, eta=FiniteHorizon(eta_c, n)),
        )
        report = run_experiment(point_cfg, write=False)
        stats = report.aggregate["min_grad_sq"]
        means.append(stats["mean"])
        stds.append(stats["std"])
        oracle = make_oracle(point_cfg.oracle)
        try:
            audit = diagnostics.make_audit_config(report.results, oracle, point_cfg.coefficients)
            rhs, _, _ = diagnostics.bound_rhs(report.results, point_cfg.coefficients, audit)
        except diagnostics.ConfigError:
            rhs = None
        bounds.append(rhs)
    csv_path = None
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        csv_path = os.path.join(cfg.out_dir, "rate_curve.csv")
        with open(csv_path, "w", newline="") as fh:
            fh.write("N,mean_min_grad_sq,std_min_grad_sq,rhs_bound\n")
            for n, m, s, r in zip(n_list, means, stds, bounds):
                rhs_str = "" if r is None else _format_float(r)
                fh.write(f"{n},{_format_float(m)},{_format_float(s)},{rhs_str}\n")
    return RateCurveReport(
        n_values=n_list,
        mean_min_grad_sq=means,
        std_min_grad_sq=stds,
        rhs_bound=bounds,
        csv_path=csv_path,
    )
