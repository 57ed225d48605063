"""Numerical verification of the convergence theory at desk scale.

Everything here consumes completed runs: descent-inequality checks along the
auxiliary update, the per-step descent-gain vector D_n and noise coupling Q_n,
the closed-form identity for theta - w, the finite-horizon bound audit for
min ||grad F(z_n)||^2, its Markov-style probability companion, the
iteration-complexity estimate, and log-log rate fits.

Expectations are estimated by seed-averaging; the bounds are expectation
bounds, so the empirical mean is the only desk-scale reading. Audits
recompute the tail sums C_{n,N} with the true final N of the run, and every
R_n / m_n is rebuilt from the learning rates the run actually used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedules import (
    CoefficientConfig,
    Decreasing,
    FiniteHorizon,
    big_gamma_seq,
    c_over_mu_gamma_seq,
    m_coefficient,
    r_bound_coefficient,
)
from .optimizers import RunResult
from .vectors import DomainError, ParamVector, as_vector


class ConfigError(ValueError):
    """An audit was asked to run without the constants it needs."""


class StateErrorForAudit(RuntimeError):
    """The trace lacks the recorded fields an audit needs."""


# ---------------------------------------------------------------------------
# descent inequality


def descent_check(oracle, x, y) -> float:
    """F(y) - F(x) - <grad F(x), y - x> - (L/2)||y - x||^2; nonpositive means the inequality holds."""
    if getattr(oracle, "lipschitz", None) is None:
        raise ConfigError("descent_check needs an oracle with a declared Lipschitz constant")
    x = as_vector(x)
    y = as_vector(y)
    diff = y - x
    return float(
        oracle.value(y)
        - oracle.value(x)
        - oracle.gradient(x) @ diff
        - 0.5 * oracle.lipschitz * (diff @ diff)
    )


# ---------------------------------------------------------------------------
# per-step audit quantities


def compute_Dn(cfg: CoefficientConfig, n: int, n_final: int, alpha, lipschitz: float) -> ParamVector:
    """Descent-gain vector lambda_n - L lambda_n^2 - (L B / 2) C_{n,N}/(mu_n Gamma_n) (lambda_n - alpha_n)^2.

    With alpha within the cap this dominates (M/2) alpha_n componentwise.
    """
    if lipschitz is None or lipschitz <= 0.0:
        raise ConfigError("compute_Dn needs a positive Lipschitz constant")
    alpha = as_vector(alpha)
    ratio = float(c_over_mu_gamma_seq(cfg, n_final)[n - 1])
    lam = cfg.M * alpha
    return lam - lipschitz * lam**2 - 0.5 * lipschitz * cfg.B * ratio * (lam - alpha) ** 2


def compute_Qn(
    cfg: CoefficientConfig,
    n: int,
    n_final: int,
    lipschitz: float,
    delta,
    alpha,
    grad_w,
    grad_z,
) -> float:
    """Noise-coupling scalar; conditionally mean-zero because delta is."""
    if lipschitz is None or lipschitz <= 0.0:
        raise ConfigError("compute_Qn needs a positive Lipschitz constant")
    delta = as_vector(delta)
    alpha = as_vector(alpha)
    grad_w = as_vector(grad_w)
    grad_z = as_vector(grad_z)
    ratio = float(c_over_mu_gamma_seq(cfg, n_final)[n - 1])
    lam = cfg.M * alpha
    coupling = lam * (grad_w - lipschitz * lam * grad_z)
    coupling = coupling - lipschitz * cfg.B * ratio * (lam - alpha) ** 2 * grad_z
    return float(delta @ coupling)


@dataclass
class StepAudit:
    """One iteration's worth of inequality evidence."""

    n: int
    grad_norm_sq_at_z: float
    D_n: ParamVector
    Q_n: float
    m_n: float
    descent_gap: float


def audit_steps(result: RunResult, cfg: CoefficientConfig, oracle, grad_bound: float | None = None) -> list[StepAudit]:
    """Audit every step of a recorded accelerated-form run.

    Needs a full trace (record_full=True) of the ``sagm`` formulation: the
    descent gap is measured along the w-update and Q_n couples the noise to
    the gradient at w_n. The gradient bound defaults to the run's empirical
    max, which keeps m_n <= (M/2) alpha_n valid by construction.
    """
    if result.full is None or result.full.w is None:
        raise StateErrorForAudit("audit_steps needs a full accelerated-form trace")
    if getattr(oracle, "lipschitz", None) is None:
        raise ConfigError("audit_steps needs an oracle with a declared Lipschitz constant")
    lip = oracle.lipschitz
    n_final = result.n_iters
    k_bound = result.g_norm_max if grad_bound is None else grad_bound
    ratios = c_over_mu_gamma_seq(cfg, n_final)
    full = result.full
    lam = cfg.M * full.alpha
    d_all = lam - lip * lam**2 - 0.5 * lip * cfg.B * ratios[:, None] * (lam - full.alpha) ** 2
    m_coef = m_coefficient(cfg, k_bound)
    f_w = np.array([oracle.value(full.w[i]) for i in range(n_final + 1)])
    audits = []
    for i in range(n_final):
        w_n, w_next = full.w[i], full.w[i + 1]
        diff = w_next - w_n
        grad_w = oracle.gradient(w_n)
        gap = float(f_w[i + 1] - f_w[i] - grad_w @ diff - 0.5 * lip * (diff @ diff))
        q_n = float(
            full.delta[i]
            @ (
                lam[i] * (grad_w - lip * lam[i] * full.grad_z[i])
                - lip * cfg.B * ratios[i] * (lam[i] - full.alpha[i]) ** 2 * full.grad_z[i]
            )
        )
        audits.append(
            StepAudit(
                n=i + 1,
                grad_norm_sq_at_z=float(full.grad_z[i] @ full.grad_z[i]),
                D_n=d_all[i],
                Q_n=q_n,
                m_n=m_coef * float(result.eta[i]),
                descent_gap=gap,
            )
        )
    return audits


# ---------------------------------------------------------------------------
# closed-form identity for the theta - w gap


def theta_w_closed_form_check(result: RunResult, cfg: CoefficientConfig) -> float:
    """Max relative gap between theta_{n+1} - w_{n+1} and its weighted gradient sum.

    The accelerated form satisfies, for every n,
    theta_{n+1} - w_{n+1} = Gamma_n * sum_{j<=n} ((lambda_j - alpha_j)/Gamma_j) g_j;
    this recomputes the right-hand side from the recorded trace.
    """
    if result.full is None or result.full.w is None:
        raise StateErrorForAudit("closed-form check needs a full accelerated-form trace")
    full = result.full
    n_final = result.n_iters
    gammas = big_gamma_seq(cfg, n_final)
    running = np.zeros_like(full.theta[0])
    worst = 0.0
    for i in range(n_final):
        running = running + ((full.lam[i] - full.alpha[i]) / gammas[i]) * full.g[i]
        rhs = gammas[i] * running
        lhs = full.theta[i + 1] - full.w[i + 1]
        dev = float(np.linalg.norm(lhs - rhs) / (1.0 + np.linalg.norm(rhs)))
        worst = max(worst, dev)
    return worst


# ---------------------------------------------------------------------------
# finite-horizon bound audit


@dataclass
class BoundAuditConfig:
    """Constants of the finite-horizon bound; all positive."""

    M_bar: float  # E[F(w_1)] minus a lower bound of F
    L: float
    sigma: float
    B: float
    K: float
    K_is_empirical: bool = False

    def __post_init__(self):
        for name in ("M_bar", "L", "B", "K"):
            if getattr(self, name) is None or getattr(self, name) <= 0.0:
                raise ConfigError(f"bound audit needs {name} > 0")
        if self.sigma < 0.0:
            raise ConfigError("bound audit needs sigma >= 0")


def make_audit_config(results: list[RunResult], oracle, cfg: CoefficientConfig, grad_bound=None) -> BoundAuditConfig:
    """Assemble audit constants from runs and oracle metadata.

    The gradient bound falls back to the max ||g_n|| observed across the
    runs, flagged as empirical. Oracles without a Lipschitz constant or a
    known lower bound (CSV-ingested data included) are refused.
    """
    if getattr(oracle, "lipschitz", None) is None:
        raise ConfigError("bound audit needs an oracle with a declared Lipschitz constant")
    if getattr(oracle, "f_lower_bound", None) is None:
        raise ConfigError("bound audit needs a known lower bound of the objective")
    declared = grad_bound if grad_bound is not None else getattr(oracle, "grad_bound", None)
    if declared is None:
        k_val = max(r.g_norm_max for r in results)
        empirical = True
    else:
        k_val = declared
        empirical = False
    m_bar = float(np.mean([r.f_start for r in results])) - oracle.f_lower_bound
    if m_bar <= 0.0:
        m_bar = max(m_bar, 1e-12)  # started at the minimum; keep the ratio defined
    return BoundAuditConfig(
        M_bar=m_bar,
        L=oracle.lipschitz,
        sigma=oracle.sigma,
        B=cfg.B,
        K=k_val,
        K_is_empirical=empirical,
    )


def _check_shared_etas(results: list[RunResult]) -> np.ndarray:
    etas = results[0].eta
    for r in results[1:]:
        if r.n_iters != results[0].n_iters or not np.array_equal(r.eta, etas):
            raise ConfigError("bound audit needs runs sharing one config and horizon")
    return etas


def bound_rhs(results: list[RunResult], cfg: CoefficientConfig, audit: BoundAuditConfig) -> tuple[float, float, float]:
    """(RHS, sum m_n, sum R_n) of the finite-horizon bound, from recorded rates."""
    etas = _check_shared_etas(results)
    sum_r = r_bound_coefficient(cfg) * float(np.sum(etas**2))
    sum_m = m_coefficient(cfg, audit.K) * float(np.sum(etas))
    rhs = (audit.M_bar + 0.5 * audit.L * audit.sigma**2 * sum_r) / sum_m
    return rhs, sum_m, sum_r


@dataclass
class AuditReport:
    n_runs: int
    n_iters: int
    mean_min_grad_sq: float
    std_min_grad_sq: float
    rhs: float
    sum_m: float
    sum_r: float
    audit: BoundAuditConfig
    passed: bool

    def as_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "n_iters": self.n_iters,
            "mean_min_grad_sq": self.mean_min_grad_sq,
            "std_min_grad_sq": self.std_min_grad_sq,
            "rhs": self.rhs,
            "sum_m": self.sum_m,
            "sum_r": self.sum_r,
            "M_bar": self.audit.M_bar,
            "K": self.audit.K,
            "K_is_empirical": self.audit.K_is_empirical,
            "passed": self.passed,
        }


def bound_audit(results: list[RunResult], cfg: CoefficientConfig, audit: BoundAuditConfig) -> AuditReport:
    """Empirical mean of min_n ||grad F(z_n)||^2 against the finite-horizon RHS."""
    if not results:
        raise ConfigError("bound audit needs at least one run")
    rhs, sum_m, sum_r = bound_rhs(results, cfg, audit)
    mins = np.array([r.min_grad_sq for r in results])
    mean = float(np.mean(mins))
    return AuditReport(
        n_runs=len(results),
        n_iters=results[0].n_iters,
        mean_min_grad_sq=mean,
        std_min_grad_sq=float(np.std(mins)),
        rhs=rhs,
        sum_m=sum_m,
        sum_r=sum_r,
        audit=audit,
        passed=mean <= rhs,
    )


@dataclass
class MarkovReport:
    delta_prime: float
    threshold: float
    fraction: float
    passed: bool


def markov_check(
    results: list[RunResult],
    delta_prime: float,
    cfg: CoefficientConfig,
    audit: BoundAuditConfig,
    min_runs: int = 50,
) -> MarkovReport:
    """Fraction of runs whose min grad^2 stays within RHS/delta'; expect >= 1 - delta'."""
    if not 0.0 < delta_prime <= 1.0:
        raise ConfigError("delta_prime in (0, 1] required")
    if len(results) < min_runs:
        raise ConfigError(f"markov check needs >= {min_runs} runs, got {len(results)}")
    rhs, _, _ = bound_rhs(results, cfg, audit)
    threshold = rhs / delta_prime
    fraction = float(np.mean([r.min_grad_sq <= threshold for r in results]))
    return MarkovReport(
        delta_prime=delta_prime,
        threshold=threshold,
        fraction=fraction,
        passed=fraction >= 1.0 - delta_prime,
    )


# ---------------------------------------------------------------------------
# iteration complexity


def complexity_estimate(
    audit: BoundAuditConfig,
    cfg: CoefficientConfig,
    delta: float,
    c_hat: float | None = None,
) -> int:
    """Iterations needed to push the averaged expected grad^2 below delta.

    Evaluates 4 ((K + eps) (M_bar + (L sigma^2 / 2) d Q C^2 nu^2 / eps^2)
    / (M C nu delta))^2 with Q = M^2 + B c_hat (M - 1)^2, rounded up. The
    learning-rate constant C comes from the config's C/sqrt(N) or C/sqrt(n)
    schedule; c_hat defaults to 1/mu^2.
    """
    if delta <= 0.0:
        raise DomainError("delta > 0 required")
    sched = cfg.eta
    if isinstance(sched, (FiniteHorizon, Decreasing)):
        c_const = sched.c
    else:
        raise ConfigError("complexity estimate needs a C/sqrt(N) or C/sqrt(n) schedule")
    if c_hat is None:
        c_hat = 1.0 / cfg.mu**2
    q = cfg.M**2 + audit.B * c_hat * (cfg.M - 1.0) ** 2
    noise_term = 0.5 * audit.L * audit.sigma**2 * (cfg.d * q * c_const**2 * cfg.nu**2 / cfg.epsilon**2)
    ratio = (audit.K + cfg.epsilon) * (audit.M_bar + noise_term) / (cfg.M * c_const * cfg.nu * delta)
    return math.ceil(4.0 * ratio**2)


# ---------------------------------------------------------------------------
# rate fits


@dataclass
class RateFit:
    """Log-log slope against N plus the fit quality of a chosen model curve.

    ``slope`` is the least-squares slope of log(y) on log(N) (so exact
    1/sqrt(N) data yields -0.5); ``r_squared`` measures how well log(y) is
    explained by an affine function of the log of the model curve, which is
    what separates 1/sqrt(N) from log(N)/sqrt(N).
    """

    slope: float
    intercept: float
    r_squared: float
    model: str


_MODELS = {
    "inv_sqrt_n": lambda n: 1.0 / np.sqrt(n),
    "log_over_sqrt_n": lambda n: np.log(n) / np.sqrt(n),
}


def rate_fit(n_values, min_grad_sq, model: str = "inv_sqrt_n") -> RateFit:
    n_values = np.asarray(n_values, dtype=np.float64)
    y = np.asarray(min_grad_sq, dtype=np.float64)
    if model not in _MODELS:
        raise ConfigError(f"unknown rate model {model!r}; choose from {sorted(_MODELS)}")
    if n_values.size < 3 or y.size != n_values.size:
        raise ConfigError("rate fit needs >= 3 (N, value) pairs")
    if np.max(n_values) / np.min(n_values) < 99.0:
        raise ConfigError("rate fit needs N values spanning >= 2 decades")
    if np.any(y <= 0.0) or np.any(n_values <= 1.0):
        raise DomainError("rate fit needs positive values and N > 1")
    log_n = np.log(n_values)
    log_y = np.log(y)
    slope, intercept = np.polyfit(log_n, log_y, 1)
    x_model = np.log(_MODELS[model](n_values))
    a, b = np.polyfit(x_model, log_y, 1)
    pred = a * x_model + b
    ss_res = float(np.sum((log_y - pred) ** 2))
    ss_tot = float(np.sum((log_y - np.mean(log_y)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r_squared, model=model)
