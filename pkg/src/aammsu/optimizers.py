"""Step engines for the shifted-update momentum family, plus an AMSGrad baseline.

Four formulations of the same method are implemented side by side:

* ``TwoSagm`` — the two-step accelerated form: twin interpolated points
  (y_n, z_n) between a main iterate theta and an auxiliary iterate w, with
  twin stepsizes alpha_n and lambda_n = M alpha_n.
* ``Ahbm`` — the heavy-ball rewriting: inertial differences
  theta_n - theta_{n-1} plus a lagged-gradient correction omega_n * g_{n-1}.
* ``AammsuRaw`` — the momentum-accumulator form p_{n+1} = tau p_n + nu g_n
  - k g_{n-1}, with coefficients mapped forward from the schedules module.
* ``SutskeverAammsu`` — the framework-friendly form that tracks the parameter
  increment m_n = theta_n - theta_{n-1} directly and steps the shifted
  iterate z in place.

Fed the same gradient stream they trace out identical iterates (the heavy-ball
form from the second iteration, the accumulator form from the third);
``verify_equivalence`` replays one recorded stream through all four and
reports the worst drift. Within each iteration the order is fixed: the
gradient is drawn at z_n first, and only then are the squared-gradient
accumulator and the stepsizes advanced. All five engines share that
accumulator logic, so baseline comparisons differ only in the update rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schedules import (
    CoefficientConfig,
    Constant,
    beta_at,
    eta_at,
    gamma_at,
    gamma_tilde_at,
    mu_at,
    omega_factor_at,
    var_changes_forward,
)
from .vectors import DimensionMismatch, DomainError, ParamVector, as_vector


class StateError(RuntimeError):
    """Stepper invoked without the history its recursion needs."""


class StepsizeCapError(RuntimeError):
    """Strict mode: a component of alpha_n exceeded the configured cap."""


# ---------------------------------------------------------------------------
# shared squared-gradient state


class SquaredGradState:
    """EMA of squared gradients with the running-max correction.

    ``v`` is componentwise nondecreasing, which makes the effective stepsize
    componentwise nonincreasing for a constant learning rate; if every
    observed gradient satisfies ||g|| <= K then v <= K^2 componentwise.
    """

    def __init__(self, d: int):
        if d < 1:
            raise DomainError("dimension d >= 1 required")
        self.v_tilde = np.zeros(d)
        self.v = np.zeros(d)
        self.n = 0


def update_squared_grads(sq: SquaredGradState, g, beta2: float) -> SquaredGradState:
    """Advance the EMA and its running max with the squared gradient."""
    if not 0.0 < beta2 < 1.0:
        raise DomainError("beta2 in (0, 1) required")
    g = as_vector(g)
    sq.v_tilde = beta2 * sq.v_tilde + (1.0 - beta2) * (g * g)
    sq.v = np.maximum(sq.v, sq.v_tilde)
    sq.n += 1
    return sq


def effective_stepsize(sq: SquaredGradState, eta: float, epsilon: float) -> ParamVector:
    """Componentwise eta / (epsilon + sqrt(v)); always in (0, eta/epsilon]."""
    if eta <= 0.0:
        raise DomainError("eta must be positive")
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    return eta / (epsilon + np.sqrt(sq.v))


# ---------------------------------------------------------------------------
# per-step record


@dataclass
class StepInfo:
    """What one iteration produced, with iterates as they stood at its start."""

    n: int
    z: ParamVector
    g: ParamVector
    alpha: ParamVector
    eta: float
    theta: ParamVector
    y: ParamVector | None = None
    w: ParamVector | None = None
    lam: ParamVector | None = None


def _init_pair(theta0, w0):
    theta = as_vector(theta0).astype(np.float64, copy=True)
    w = theta.copy() if w0 is None else as_vector(w0).astype(np.float64, copy=True)
    if w.size != theta.size:
        raise DimensionMismatch("theta0 and w0 must share a dimension")
    return theta, w


# ---------------------------------------------------------------------------
# formulation 1: two-step accelerated form (the reference)


class TwoSagm:
    """Two-step accelerated form; the ground truth for equivalence checks.

    When only one initial point is supplied the auxiliary iterate starts at
    w_1 = theta_1. At n = 1 both interpolations collapse onto w because
    mu_1 = gamma_tilde_1 = 1.
    """

    name = "sagm"

    def __init__(self, cfg: CoefficientConfig, theta0, w0=None):
        self.cfg = cfg
        self.theta, self.w = _init_pair(theta0, w0)
        self.start_w = self.w.copy()
        self.sq = SquaredGradState(self.theta.size)
        self.n = 1
        self.last_z: ParamVector | None = None
        self.last_y: ParamVector | None = None

    def step(self, oracle, eta: float) -> StepInfo:
        cfg, n = self.cfg, self.n
        gt = gamma_tilde_at(cfg, n)
        mu = mu_at(cfg, n)
        theta_n, w_n = self.theta, self.w
        z = (1.0 - gt) * theta_n + gt * w_n
        y = (1.0 - mu) * theta_n + mu * w_n
        g = oracle.noisy_gradient(z, n)
        update_squared_grads(self.sq, g, cfg.beta2)
        a = effective_stepsize(self.sq, eta, cfg.epsilon)
        alpha = cfg.nu * a
        lam = cfg.M * alpha
        self.w = w_n - lam * g
        self.theta = y - alpha * g
        self.last_z, self.last_y = z, y
        self.n += 1
        return StepInfo(n=n, z=z, g=g, alpha=alpha, eta=eta, theta=theta_n, y=y, w=w_n, lam=lam)


# ---------------------------------------------------------------------------
# formulation 2: heavy-ball form


class Ahbm:
    """Heavy-ball form; recursion defined from n >= 2, first step bootstrapped.

    The bootstrap runs the accelerated-form update once (the formulations
    coincide at n = 1) to populate the history (theta_{n-1}, g_{n-1},
    alpha_{n-1}) the inertial recursion needs.
    """

    name = "ahbm"

    def __init__(self, cfg: CoefficientConfig, theta0, w0=None):
        self.cfg = cfg
        self.theta, self._w1 = _init_pair(theta0, w0)
        self.start_w = self._w1.copy()
        self.sq = SquaredGradState(self.theta.size)
        self.n = 1
        self.theta_prev: ParamVector | None = None
        self.g_prev: ParamVector | None = None
        self.alpha_prev: ParamVector | None = None

    def step(self, oracle, eta: float) -> StepInfo:
        cfg, n = self.cfg, self.n
        if n == 1:
            gt = gamma_tilde_at(cfg, 1)
            mu = mu_at(cfg, 1)
            theta_n = self.theta
            z = (1.0 - gt) * theta_n + gt * self._w1
            y = (1.0 - mu) * theta_n + mu * self._w1
        else:
            if self.g_prev is None or self.theta_prev is None:
                raise StateError("heavy-ball recursion needs (theta_prev, g_prev, alpha_prev)")
            theta_n = self.theta
            d_theta = theta_n - self.theta_prev
            lag = (omega_factor_at(cfg, n) * self.alpha_prev) * self.g_prev
            y = theta_n + beta_at(cfg, n) * d_theta - mu_at(cfg, n) * lag
            z = theta_n + gamma_at(cfg, n) * d_theta - gamma_tilde_at(cfg, n) * lag
        g = oracle.noisy_gradient(z, n)
        update_squared_grads(self.sq, g, cfg.beta2)
        a = effective_stepsize(self.sq, eta, cfg.epsilon)
        alpha = cfg.nu * a
        self.theta_prev = theta_n
        self.theta = y - alpha * g
        self.g_prev = g
        self.alpha_prev = alpha
        self.n += 1
        return StepInfo(n=n, z=z, g=g, alpha=alpha, eta=eta, theta=theta_n, y=y, lam=cfg.M * alpha)

    @classmethod
    def from_history(cls, cfg, theta, theta_prev, g_prev, alpha_prev, sq, n):
        """Resume mid-stream; all history fields must be populated."""
        self = cls.__new__(cls)
        self.cfg = cfg
        self.theta = as_vector(theta).copy()
        self._w1 = None
        self.theta_prev = None if theta_prev is None else as_vector(theta_prev).copy()
        self.g_prev = None if g_prev is None else as_vector(g_prev).copy()
        self.alpha_prev = None if alpha_prev is None else as_vector(alpha_prev).copy()
        self.sq = sq
        self.n = n
        return self


# ---------------------------------------------------------------------------
# formulation 3: raw momentum-accumulator form


class AammsuRaw:
    """Momentum-accumulator form; its own recursion starts at n = 3.

    Iterations 1 and 2 are bootstrapped through the accelerated/heavy-ball
    updates, after which the accumulator is seeded by
    p_3 = -(theta_3 - theta_2) / r_2 and the recursion runs on
    (p, g_{n-1}, r_{n-1}).
    """

    name = "aammsu_raw"

    def __init__(self, cfg: CoefficientConfig, theta0, w0=None):
        self.cfg = cfg
        self.theta, self._w1 = _init_pair(theta0, w0)
        self.start_w = self._w1.copy()
        self.sq = SquaredGradState(self.theta.size)
        self.n = 1
        self._theta_prev: ParamVector | None = None
        self.p: ParamVector | None = None
        self.g_prev: ParamVector | None = None
        self.r_prev: ParamVector | None = None
        self.alpha_prev: ParamVector | None = None

    def step(self, oracle, eta: float) -> StepInfo:
        cfg, n = self.cfg, self.n
        theta_n = self.theta
        if n == 1:
            gt = gamma_tilde_at(cfg, 1)
            mu = mu_at(cfg, 1)
            z = (1.0 - gt) * theta_n + gt * self._w1
            y = (1.0 - mu) * theta_n + mu * self._w1
            g = oracle.noisy_gradient(z, n)
            update_squared_grads(self.sq, g, cfg.beta2)
            a = effective_stepsize(self.sq, eta, cfg.epsilon)
            alpha = cfg.nu * a
            self._theta_prev = theta_n
            self.theta = y - alpha * g
        elif n == 2:
            lag = (omega_factor_at(cfg, 2) * self.alpha_prev) * self.g_prev
            d_theta = theta_n - self._theta_prev
            y = theta_n + beta_at(cfg, 2) * d_theta - mu_at(cfg, 2) * lag
            z = theta_n + gamma_at(cfg, 2) * d_theta - gamma_tilde_at(cfg, 2) * lag
            g = oracle.noisy_gradient(z, n)
            update_squared_grads(self.sq, g, cfg.beta2)
            a = effective_stepsize(self.sq, eta, cfg.epsilon)
            alpha = cfg.nu * a
            theta_next = y - alpha * g
            # seed the accumulator from the increment it must reproduce
            self.p = -(theta_next - theta_n) / a
            self.theta = theta_next
            self._theta_prev = None
        else:
            if self.p is None or self.g_prev is None or self.r_prev is None:
                raise StateError("momentum recursion needs (p, g_prev, r_prev, alpha_prev)")
            omega = omega_factor_at(cfg, n) * self.alpha_prev
            z = (
                theta_n
                - gamma_at(cfg, n) * (self.r_prev * self.p)
                - gamma_tilde_at(cfg, n) * (omega * self.g_prev)
            )
            g = oracle.noisy_gradient(z, n)
            update_squared_grads(self.sq, g, cfg.beta2)
            a = effective_stepsize(self.sq, eta, cfg.epsilon)
            tau, k, alpha = var_changes_forward(cfg, self.r_prev, a, n)
            p_next = tau * self.p + cfg.nu * g - k * self.g_prev
            self.theta = theta_n - a * p_next
            self.p = p_next
        self.g_prev = g
        self.r_prev = a
        self.alpha_prev = alpha
        self.n += 1
        return StepInfo(n=n, z=z, g=g, alpha=alpha, eta=eta, theta=theta_n, lam=cfg.M * alpha)


# ---------------------------------------------------------------------------
# formulation 4: Sutskever-style momentum form


class SutskeverAammsu:
    """Sutskever-style form: the shifted iterate z is stepped in place.

    The loop body branches on the iteration counter exactly as the adaptive
    momentum recursion requires: n = 1 only draws the gradient at z_1 = w_1
    and updates the accumulator; n = 2 applies the one-off
    [1 + gamma_tilde (M - 1)] correction; from n = 3 the parameter increment
    m and z advance by their two-lag recursions. ``theta_shadow`` maintains
    the reconstructed main iterate (theta_{n} = theta_{n-1} + m_n) so
    equivalence against the accelerated form can be tested directly. m is
    initialized to zero: its only uses before n = 3 carry zero coefficients,
    so the value is inconsequential and zero keeps that auditable.
    """

    name = "sutskever"

    def __init__(self, cfg: CoefficientConfig, theta0, w0=None):
        self.cfg = cfg
        theta, w = _init_pair(theta0, w0)
        self.z = w
        self.start_w = w.copy()
        self.m = np.zeros_like(theta)
        self.theta_shadow = theta
        self.sq = SquaredGradState(theta.size)
        self.n = 1
        self.g_prev: ParamVector | None = None
        self.g_prev2: ParamVector | None = None
        self.alpha_prev: ParamVector | None = None
        self.alpha_prev2: ParamVector | None = None

    @property
    def theta(self) -> ParamVector:
        return self.theta_shadow

    def step(self, oracle, eta: float) -> StepInfo:
        cfg, n = self.cfg, self.n
        big_m = cfg.M
        if n == 2:
            if self.g_prev is None:
                raise StateError("second step needs (g_1, alpha_1)")
            first_step = self.alpha_prev * self.g_prev
            self.theta_shadow = self.z - first_step  # theta_2 = y_1 - alpha_1 g_1 with y_1 = w_1 = z_1
            self.z = self.z - (1.0 + gamma_tilde_at(cfg, 2) * (big_m - 1.0)) * first_step
        elif n >= 3:
            if self.g_prev2 is None or self.alpha_prev2 is None:
                raise StateError("two-lag recursion needs (g_{n-2}, alpha_{n-2}) history")
            mu_nm2 = mu_at(cfg, n - 2)
            mu_nm1 = mu_at(cfg, n - 1)
            beta_prev = beta_at(cfg, n - 1)
            gam_n = gamma_at(cfg, n)
            gam_prev = gamma_at(cfg, n - 1)
            gt_n = gamma_tilde_at(cfg, n)
            gt_prev = gamma_tilde_at(cfg, n - 1)
            lag2 = self.alpha_prev2 * self.g_prev2
            lag1 = self.alpha_prev * self.g_prev
            m_next = (
                beta_prev * self.m
                - (mu_nm1 / mu_nm2) * (big_m * mu_nm2 - 1.0) * lag2
                - lag1
            )
            self.z = (
                self.z
                + (beta_prev * (1.0 + gam_n) - gam_prev) * self.m
                - ((big_m * mu_nm2 - 1.0) / mu_nm2) * (mu_nm1 * (1.0 + gam_n) - gt_prev) * lag2
                - ((1.0 + gam_n) + gt_n * (big_m * mu_nm1 - 1.0) / mu_nm1) * lag1
            )
            self.m = m_next
            self.theta_shadow = self.theta_shadow + m_next
        g = oracle.noisy_gradient(self.z, n)
        update_squared_grads(self.sq, g, cfg.beta2)
        a = effective_stepsize(self.sq, eta, cfg.epsilon)
        alpha = cfg.nu * a
        self.g_prev2, self.g_prev = self.g_prev, g
        self.alpha_prev2, self.alpha_prev = self.alpha_prev, alpha
        self.n += 1
        return StepInfo(
            n=n, z=self.z, g=g, alpha=alpha, eta=eta, theta=self.theta_shadow, lam=cfg.M * alpha
        )


# ---------------------------------------------------------------------------
# AMSGrad baseline


class Amsgrad:
    """Plain AMSGrad with the same max-corrected second moment, no bias correction.

    Kept deliberately minimal so comparisons against the shifted-update family
    isolate the update rule: the squared-gradient accumulator is shared code.
    """

    name = "amsgrad"

    def __init__(self, cfg: CoefficientConfig, theta0, beta1: float = 0.9):
        if not 0.0 <= beta1 < 1.0:
            raise DomainError("beta1 in [0, 1) required")
        self.cfg = cfg
        self.theta = as_vector(theta0).astype(np.float64, copy=True)
        self.start_w = self.theta.copy()
        self.m1 = np.zeros_like(self.theta)
        self.beta1 = beta1
        self.sq = SquaredGradState(self.theta.size)
        self.n = 1

    def step(self, oracle, eta: float) -> StepInfo:
        n = self.n
        theta_n = self.theta
        g = oracle.noisy_gradient(theta_n, n)
        self.m1 = self.beta1 * self.m1 + (1.0 - self.beta1) * g
        update_squared_grads(self.sq, g, self.cfg.beta2)
        a = effective_stepsize(self.sq, eta, self.cfg.epsilon)
        self.theta = theta_n - a * self.m1
        self.n += 1
        return StepInfo(n=n, z=theta_n, g=g, alpha=a, eta=eta, theta=theta_n)


FORMULATIONS = {
    "sagm": TwoSagm,
    "ahbm": Ahbm,
    "aammsu_raw": AammsuRaw,
    "sutskever": SutskeverAammsu,
    "amsgrad": Amsgrad,
}


def make_optimizer(name: str, cfg: CoefficientConfig, theta0, w0=None, beta1: float = 0.9):
    if name not in FORMULATIONS:
        raise DomainError(f"unknown optimizer {name!r}; choose from {sorted(FORMULATIONS)}")
    if name == "amsgrad":
        return Amsgrad(cfg, theta0, beta1=beta1)
    return FORMULATIONS[name](cfg, theta0, w0)


# ---------------------------------------------------------------------------
# running a stepper and recording what diagnostics need


@dataclass
class FullTrace:
    """Per-step vectors for identity and descent audits; (N, d) unless noted."""

    z: np.ndarray
    g: np.ndarray
    grad_z: np.ndarray  # exact gradient at z_n
    delta: np.ndarray  # g_n - grad F(z_n)
    alpha: np.ndarray
    lam: np.ndarray | None
    theta: np.ndarray  # (N+1, d): theta_1..theta_{N+1}
    w: np.ndarray | None  # (N+1, d) for the accelerated form only


@dataclass
class RunResult:
    """Per-iteration scalars plus the terminal summary of one run."""

    optimizer: str
    seed: int
    n_iters: int
    loss: np.ndarray
    grad_sq: np.ndarray
    running_min: np.ndarray
    eta: np.ndarray
    alpha_mean: np.ndarray
    alpha_max: np.ndarray
    f_start: float
    g_norm_max: float
    final_theta: ParamVector
    full: FullTrace | None = None

    @property
    def min_grad_sq(self) -> float:
        return float(self.running_min[-1])

    @property
    def final_loss(self) -> float:
        return float(self.loss[-1])

    @property
    def final_grad_sq(self) -> float:
        return float(self.grad_sq[-1])


def run_steps(
    optimizer,
    oracle,
    n_iters: int,
    *,
    eta_for=None,
    record_full: bool = False,
    alpha_cap_value: float | None = None,
    seed: int = 0,
) -> RunResult:
    """Drive a stepper for n_iters iterations, recording the trace.

    ``eta_for(n)`` supplies the learning rate (defaults to the config
    schedule). When ``alpha_cap_value`` is set, any component of alpha_n above
    it aborts the run: that is the strict theory-validation mode, not the
    default experiment behavior.
    """
    cfg = optimizer.cfg
    if eta_for is None:
        eta_for = lambda n: eta_at(cfg, n)
    d = optimizer.theta.size
    loss = np.empty(n_iters)
    grad_sq = np.empty(n_iters)
    running_min = np.empty(n_iters)
    etas = np.empty(n_iters)
    alpha_mean = np.empty(n_iters)
    alpha_max = np.empty(n_iters)
    is_sagm = isinstance(optimizer, TwoSagm)
    if record_full:
        zs = np.empty((n_iters, d))
        gs = np.empty((n_iters, d))
        grads = np.empty((n_iters, d))
        deltas = np.empty((n_iters, d))
        alphas = np.empty((n_iters, d))
        lams = np.empty((n_iters, d))
        thetas = np.empty((n_iters + 1, d))
        ws = np.empty((n_iters + 1, d)) if is_sagm else None
    f_start = oracle.value(optimizer.start_w)
    g_norm_max = 0.0
    best = np.inf
    for i in range(n_iters):
        n = i + 1
        eta_n = eta_for(n)
        info = optimizer.step(oracle, eta_n)
        if alpha_cap_value is not None and np.any(info.alpha > alpha_cap_value * (1.0 + 1e-12)):
            raise StepsizeCapError(
                f"alpha exceeded the cap {alpha_cap_value:.6g} at iteration {n}"
            )
        exact = oracle.gradient(info.z)
        gsq = float(exact @ exact)
        loss[i] = oracle.value(info.z)
        grad_sq[i] = gsq
        best = min(best, gsq)
        running_min[i] = best
        etas[i] = eta_n
        alpha_mean[i] = float(np.mean(info.alpha))
        alpha_max[i] = float(np.max(info.alpha))
        g_norm_max = max(g_norm_max, float(np.linalg.norm(info.g)))
        if record_full:
            zs[i] = info.z
            gs[i] = info.g
            grads[i] = exact
            deltas[i] = info.g - exact
            alphas[i] = info.alpha
            lams[i] = info.lam if info.lam is not None else info.alpha
            thetas[i] = info.theta
            if is_sagm:
                ws[i] = info.w
    full = None
    if record_full:
        thetas[n_iters] = optimizer.theta
        if is_sagm:
            ws[n_iters] = optimizer.w
        full = FullTrace(
            z=zs, g=gs, grad_z=grads, delta=deltas, alpha=alphas, lam=lams, theta=thetas, w=ws
        )
    return RunResult(
        optimizer=getattr(optimizer, "name", type(optimizer).__name__),
        seed=seed,
        n_iters=n_iters,
        loss=loss,
        grad_sq=grad_sq,
        running_min=running_min,
        eta=etas,
        alpha_mean=alpha_mean,
        alpha_max=alpha_max,
        f_start=f_start,
        g_norm_max=g_norm_max,
        final_theta=optimizer.theta.copy(),
        full=full,
    )


# ---------------------------------------------------------------------------
# equivalence verification


class RecordingOracle:
    """Pass-through wrapper that captures the emitted gradient stream."""

    def __init__(self, oracle):
        self._oracle = oracle
        self.gradients: list[ParamVector] = []

    def __getattr__(self, item):
        return getattr(self._oracle, item)

    def noisy_gradient(self, point, n: int) -> ParamVector:
        g = self._oracle.noisy_gradient(point, n)
        self.gradients.append(g)
        return g


class ReplayOracle:
    """Feed a recorded gradient stream back, one iteration at a time.

    Every formulation replaying the stream sees bitwise-identical g_n, which
    is what makes cross-formulation comparisons meaningful even with noise.
    """

    def __init__(self, base, gradients):
        self._base = base
        self._gradients = list(gradients)

    def __getattr__(self, item):
        return getattr(self._base, item)

    def noisy_gradient(self, point, n: int) -> ParamVector:
        if not 1 <= n <= len(self._gradients):
            raise StateError(f"no recorded gradient for iteration {n}")
        return self._gradients[n - 1]


@dataclass
class EquivalenceReport:
    """Worst relative drift of each formulation against the accelerated form."""

    n_iters: int
    tol: float
    dev_ahbm_theta: float
    dev_raw_theta: float
    dev_sutskever_z: float
    dev_sutskever_theta: float

    @property
    def max_deviation(self) -> float:
        return max(
            self.dev_ahbm_theta,
            self.dev_raw_theta,
            self.dev_sutskever_z,
            self.dev_sutskever_theta,
        )

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


def _max_rel_dev(seq_a, seq_b) -> float:
    worst = 0.0
    for a, b in zip(seq_a, seq_b):
        worst = max(worst, float(np.linalg.norm(a - b) / (1.0 + np.linalg.norm(b))))
    return worst


def verify_equivalence(
    cfg: CoefficientConfig,
    oracle,
    n_iters: int,
    tol: float = 1e-9,
    *,
    theta0=None,
    w0=None,
    init_seed: int = 0,
) -> EquivalenceReport:
    """Run the accelerated form, replay its gradient stream through the others.

    Compares theta sequences (heavy-ball from n >= 2, accumulator form from
    n >= 3) and the Sutskever z and reconstructed-theta sequences, reporting
    the max relative deviation ||x - ref|| / (1 + ||ref||) per pair.
    """
    if theta0 is None:
        theta0 = np.random.default_rng(init_seed).standard_normal(oracle.d)
    theta0 = as_vector(theta0)
    if theta0.size != oracle.d:
        raise DimensionMismatch("theta0 does not match the oracle dimension")

    recorder = RecordingOracle(oracle)
    ground = TwoSagm(cfg, theta0, w0)
    ref_theta = [ground.theta.copy()]
    ref_z = []
    for n in range(1, n_iters + 1):
        info = ground.step(recorder, eta_at(cfg, n))
        ref_z.append(info.z)
        ref_theta.append(ground.theta.copy())
    replay = ReplayOracle(oracle, recorder.gradients)

    def collect(opt):
        thetas = [opt.theta.copy()]
        zs = []
        for n in range(1, n_iters + 1):
            info = opt.step(replay, eta_at(cfg, n))
            zs.append(info.z)
            thetas.append(opt.theta.copy())
        return thetas, zs

    hb_theta, _ = collect(Ahbm(cfg, theta0, w0))
    raw_theta, _ = collect(AammsuRaw(cfg, theta0, w0))
    su = SutskeverAammsu(cfg, theta0, w0)
    su_theta_steps = []
    su_z = []
    for n in range(1, n_iters + 1):
        info = su.step(replay, eta_at(cfg, n))
        su_z.append(info.z)
        su_theta_steps.append(info.theta)

    # theta indices: list position k holds theta_{k+1}
    dev_ahbm = _max_rel_dev(hb_theta[1:], ref_theta[1:])
    dev_raw = _max_rel_dev(raw_theta[2:], ref_theta[2:])
    dev_su_z = _max_rel_dev(su_z, ref_z)
    # the shadow after step n is theta_n, so compare against theta_1..theta_N
    dev_su_theta = _max_rel_dev(su_theta_steps, ref_theta[:-1])
    return EquivalenceReport(
        n_iters=n_iters,
        tol=tol,
        dev_ahbm_theta=dev_ahbm,
        dev_raw_theta=dev_raw,
        dev_sutskever_z=dev_su_z,
        dev_sutskever_theta=dev_su_theta,
    )


def random_coefficient_config(rng: np.random.Generator, d: int, eta=None) -> CoefficientConfig:
    """Draw a config from the ranges the equivalence suite sweeps."""
    mu = rng.uniform(0.1, 0.9)
    return CoefficientConfig(
        d=d,
        M=rng.uniform(0.1, 2.0),
        mu=mu,
        nu=rng.uniform(0.05, 0.95),
        gamma_tilde=rng.uniform(mu, 0.99),
        beta2=0.999,
        epsilon=1e-8,
        eta=eta if eta is not None else Constant(1e-3),
    )
