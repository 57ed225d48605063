"""Coefficient schedules and the change-of-variables maps between formulations.

Iterations are 1-based everywhere; off-by-one bugs are the dominant risk in
this codebase, so each function documents its valid index range and raises on
anything outside it. The first iteration is special: mu_1 = gamma_tilde_1 = 1,
which collapses both interpolation steps onto the auxiliary iterate and makes
the derived coefficients beta_2 and gamma_2 vanish.

The momentum schedule is the constant-tail one used throughout the
experiments: mu_n = mu for n >= 2, gamma_tilde_n = gamma_tilde for n >= 2,
with scalar (non-adaptive) inertial coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .vectors import DomainError, ParamVector, as_vector


# ---------------------------------------------------------------------------
# learning-rate schedules


@dataclass(frozen=True)
class Constant:
    """eta_n = value for every n."""

    value: float


@dataclass(frozen=True)
class FiniteHorizon:
    """eta_n = c / sqrt(horizon): constant, tuned to a fixed final iteration."""

    c: float
    horizon: int


@dataclass(frozen=True)
class Decreasing:
    """eta_n = c / sqrt(n)."""

    c: float


EtaSchedule = Constant | FiniteHorizon | Decreasing


def eta_at(cfg, n: int) -> float:
    """Learning rate at iteration n >= 1; accepts a config or a bare schedule."""
    sched = cfg.eta if isinstance(cfg, CoefficientConfig) else cfg
    if n < 1:
        raise IndexError(f"iterations are 1-based, got n={n}")
    if isinstance(sched, Constant):
        value = sched.value
    elif isinstance(sched, FiniteHorizon):
        if sched.horizon < 1:
            raise DomainError("finite-horizon schedule needs horizon >= 1")
        value = sched.c / math.sqrt(sched.horizon)
    elif isinstance(sched, Decreasing):
        value = sched.c / math.sqrt(n)
    else:
        raise TypeError(f"unknown eta schedule: {sched!r}")
    if value <= 0.0:
        raise DomainError("eta must be positive")
    return value


# ---------------------------------------------------------------------------
# hyperparameter tuple


@dataclass(frozen=True)
class CoefficientConfig:
    """Hyperparameters of the shifted-update momentum family.

    M scales the auxiliary stepsize (lambda_n = M * alpha_n), mu is the
    constant momentum tail, nu scales the effective stepsize, gamma_tilde is
    the second inertial coefficient, beta2/epsilon govern the squared-gradient
    accumulator, and B bounds (1 - gamma_tilde)^2 / (1 - mu). With
    gamma_tilde >= mu that ratio is at most 1, so the default B = 1 is always
    admissible. ``dim_scaled_B`` switches rate reporting to the B/d variant;
    it changes reported bounds only, never the iteration itself.
    """

    d: int
    M: float = 0.75
    mu: float = 0.5
    nu: float = 0.5
    gamma_tilde: float = 0.75
    beta2: float = 0.999
    epsilon: float = 1e-8
    eta: EtaSchedule = Constant(1e-3)
    B: float = 1.0
    dim_scaled_B: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("dimension d >= 1 required")
        if self.M <= 0.0:
            raise DomainError("M > 0 required")
        if not 0.0 < self.mu < 1.0:
            raise DomainError("mu in (0, 1) required")
        if not 0.0 < self.nu < 1.0:
            raise DomainError("nu in (0, 1) required")
        if not self.mu <= self.gamma_tilde < 1.0:
            raise DomainError("gamma_tilde >= mu required (and gamma_tilde < 1)")
        if not 0.0 < self.beta2 < 1.0:
            raise DomainError("beta2 in (0, 1) required")
        if self.epsilon <= 0.0:
            raise DomainError("epsilon > 0 required")
        if self.B <= 0.0:
            raise DomainError("B > 0 required")
        ratio = (1.0 - self.gamma_tilde) ** 2 / (1.0 - self.mu)
        if ratio > self.B * (1.0 + 1e-12):
            raise DomainError(
                f"B must bound (1 - gamma_tilde)^2/(1 - mu) = {ratio:.6g}, got B = {self.B}"
            )
        eta_at(self.eta, 1)  # reject degenerate schedules at construction


def _check_index(n: int, lowest: int = 1):
    if n < lowest:
        raise IndexError(f"schedule index n >= {lowest} required, got {n}")


def mu_at(cfg: CoefficientConfig, n: int) -> float:
    """Momentum coefficient: 1 at n = 1, the constant tail afterwards."""
    _check_index(n)
    return 1.0 if n == 1 else cfg.mu


def gamma_tilde_at(cfg: CoefficientConfig, n: int) -> float:
    """Second inertial coefficient: 1 at n = 1, gamma_tilde afterwards."""
    _check_index(n)
    return 1.0 if n == 1 else cfg.gamma_tilde


def beta_at(cfg: CoefficientConfig, n: int) -> float:
    """Heavy-ball inertial weight (mu_n / mu_{n-1}) (1 - mu_{n-1}); n >= 2.

    Vanishes at n = 2 and equals 1 - mu from n = 3 on.
    """
    _check_index(n, lowest=2)
    return (mu_at(cfg, n) / mu_at(cfg, n - 1)) * (1.0 - mu_at(cfg, n - 1))


def gamma_at(cfg: CoefficientConfig, n: int) -> float:
    """Shifted-iterate inertial weight (gamma_tilde_n / mu_{n-1}) (1 - mu_{n-1}); n >= 2."""
    _check_index(n, lowest=2)
    return (gamma_tilde_at(cfg, n) / mu_at(cfg, n - 1)) * (1.0 - mu_at(cfg, n - 1))


def omega_factor_at(cfg: CoefficientConfig, n: int) -> float:
    """Scalar factor M - 1/mu_{n-1} of the lagged-gradient stepsize; n >= 2."""
    _check_index(n, lowest=2)
    return cfg.M - 1.0 / mu_at(cfg, n - 1)


@dataclass(frozen=True)
class DerivedCoefficients:
    """All per-iteration scalar coefficients, bundled for traces and debugging."""

    n: int
    mu_n: float
    gamma_tilde_n: float
    Gamma_n: float
    beta_n: float | None  # defined for n >= 2
    gamma_n: float | None
    omega_factor_n: float | None


def coefficients_at(cfg: CoefficientConfig, n: int) -> DerivedCoefficients:
    _check_index(n)
    later = n >= 2
    return DerivedCoefficients(
        n=n,
        mu_n=mu_at(cfg, n),
        gamma_tilde_n=gamma_tilde_at(cfg, n),
        Gamma_n=big_gamma_at(cfg, n),
        beta_n=beta_at(cfg, n) if later else None,
        gamma_n=gamma_at(cfg, n) if later else None,
        omega_factor_n=omega_factor_at(cfg, n) if later else None,
    )


# ---------------------------------------------------------------------------
# Gamma products and their partial sums


def big_gamma_seq(cfg: CoefficientConfig, n_max: int) -> np.ndarray:
    """Gamma_1..Gamma_n as an array, via the recursion Gamma_n = (1 - mu_n) Gamma_{n-1}."""
    _check_index(n_max)
    out = np.empty(n_max)
    out[0] = 1.0
    for j in range(2, n_max + 1):
        out[j - 1] = (1.0 - mu_at(cfg, j)) * out[j - 2]
    return out


def big_gamma_at(cfg: CoefficientConfig, n: int) -> float:
    """Gamma_n; equals (1 - mu)^(n-1) under the constant-tail schedule."""
    return float(big_gamma_seq(cfg, n)[-1])


def c_sum(cfg: CoefficientConfig, n: int, n_final: int) -> float:
    """Tail sum of Gamma_j for j = n..N; bounded by (1 - mu)^(n-1) / mu."""
    _check_index(n)
    if n > n_final:
        raise IndexError(f"need n <= N, got n={n}, N={n_final}")
    seq = big_gamma_seq(cfg, n_final)
    return float(np.sum(seq[n - 1:]))


def c_over_mu_gamma_seq(cfg: CoefficientConfig, n_final: int) -> np.ndarray:
    """The ratios C_{n,N} / (mu_n Gamma_n) for n = 1..N; each is <= 1/mu^2."""
    seq = big_gamma_seq(cfg, n_final)
    tails = np.cumsum(seq[::-1])[::-1]
    mus = np.array([mu_at(cfg, j) for j in range(1, n_final + 1)])
    return tails / (mus * seq)


# ---------------------------------------------------------------------------
# stepsize cap and the constants of the rate bound


def effective_B(cfg: CoefficientConfig) -> float:
    """B as used in rate reporting; the dimension-scaled variant divides by d."""
    return cfg.B / cfg.d if cfg.dim_scaled_B else cfg.B


def alpha_cap(cfg: CoefficientConfig, lipschitz: float) -> float:
    """Componentwise upper bound on alpha_n under which the descent audit holds.

    Callers validate alpha_n <= cap; the cap itself is
    1 / (2 L (M + (B / 2 mu^2) (M - 1)^2 / M)).
    """
    if lipschitz <= 0.0:
        raise DomainError("lipschitz constant must be positive")
    if cfg.M <= 0.0:
        raise DomainError("M > 0 required")
    bulk = cfg.M + (cfg.B / (2.0 * cfg.mu**2)) * (cfg.M - 1.0) ** 2 / cfg.M
    return 1.0 / (2.0 * lipschitz * bulk)


def m_coefficient(cfg: CoefficientConfig, grad_bound: float) -> float:
    """m_n / eta_n: the per-unit-learning-rate lower bound M nu / (2 (K + eps))."""
    if grad_bound < 0.0:
        raise DomainError("gradient bound K must be nonnegative")
    return cfg.M * cfg.nu / (2.0 * (grad_bound + cfg.epsilon))


def m_lower_bound(cfg: CoefficientConfig, n: int, grad_bound: float) -> float:
    """Strictly positive lower bound M nu eta_n / (2 (K + eps)) for the descent gain."""
    value = m_coefficient(cfg, grad_bound) * eta_at(cfg, n)
    return value


def r_bound_coefficient(cfg: CoefficientConfig) -> float:
    """R_n / eta_n^2: d (nu/eps)^2 (M^2 + B (M-1)^2 / mu^2)."""
    b = effective_B(cfg)
    return (
        cfg.d
        * (cfg.nu / cfg.epsilon) ** 2
        * (cfg.M**2 + b * (cfg.M - 1.0) ** 2 / cfg.mu**2)
    )


def r_upper_bound(cfg: CoefficientConfig, n: int) -> float:
    """The noise-amplification bound R_n entering the finite-horizon rate."""
    return r_bound_coefficient(cfg) * eta_at(cfg, n) ** 2


# ---------------------------------------------------------------------------
# forward change of variables (accelerated form -> momentum form)


def var_changes_forward(
    cfg: CoefficientConfig, r_prev, r_n, n: int
) -> tuple[ParamVector, ParamVector, ParamVector]:
    """Momentum-form coefficients (tau_n, k_n, alpha_n) from the stepsize pair.

    r_prev and r_n are the effective stepsizes at iterations n-1 and n. The
    decay tau_n = beta_n r_{n-1}/r_n carries equivalence meaning from n >= 3
    (beta_2 = 0 makes the n = 2 value vanish anyway); the lagged-gradient
    weight k_n = -mu_n omega_n / r_n is defined from n >= 2.
    """
    _check_index(n, lowest=2)
    r_prev = as_vector(r_prev)
    r_n = as_vector(r_n)
    if r_prev.size != r_n.size:
        raise DomainError("stepsize vectors must share a dimension")
    if np.any(r_n <= 0.0) or np.any(r_prev <= 0.0):
        raise DomainError("effective stepsizes must be positive componentwise")
    alpha = cfg.nu * r_n
    omega = omega_factor_at(cfg, n) * (cfg.nu * r_prev)
    tau = beta_at(cfg, n) * (r_prev / r_n)
    k = -mu_at(cfg, n) * (omega / r_n)
    return tau, k, alpha
