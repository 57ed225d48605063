"""Adaptive accelerated momentum optimizers with shifted updates.

A small numerical-optimization library plus a benchmark harness: four
equivalent formulations of one adaptive momentum method, an AMSGrad baseline,
the coefficient schedules behind their convergence bounds, and diagnostics
that verify those bounds numerically on synthetic problems.
"""

from .schedules import (
    CoefficientConfig,
    Constant,
    Decreasing,
    FiniteHorizon,
    alpha_cap,
    eta_at,
)
from .oracles import (
    DatasetParams,
    LogisticOracle,
    OracleSpec,
    QuadraticOracle,
    RosenbrockOracle,
    finite_diff_gradient,
    generate_dataset,
    make_oracle,
    make_quadratic,
)
from .optimizers import (
    AammsuRaw,
    Ahbm,
    Amsgrad,
    EquivalenceReport,
    RunResult,
    SquaredGradState,
    SutskeverAammsu,
    TwoSagm,
    effective_stepsize,
    make_optimizer,
    run_steps,
    update_squared_grads,
    verify_equivalence,
)
from .diagnostics import (
    BoundAuditConfig,
    bound_audit,
    complexity_estimate,
    descent_check,
    markov_check,
    rate_fit,
    theta_w_closed_form_check,
)
from .harness import (
    ExperimentConfig,
    emit_rate_curve,
    load_config,
    run_experiment,
    save_config,
    sweep,
)

__all__ = [
    "AammsuRaw",
    "Ahbm",
    "Amsgrad",
    "BoundAuditConfig",
    "CoefficientConfig",
    "Constant",
    "DatasetParams",
    "Decreasing",
    "EquivalenceReport",
    "ExperimentConfig",
    "FiniteHorizon",
    "LogisticOracle",
    "OracleSpec",
    "QuadraticOracle",
    "RosenbrockOracle",
    "RunResult",
    "SquaredGradState",
    "SutskeverAammsu",
    "TwoSagm",
    "alpha_cap",
    "bound_audit",
    "complexity_estimate",
    "descent_check",
    "effective_stepsize",
    "emit_rate_curve",
    "eta_at",
    "finite_diff_gradient",
    "generate_dataset",
    "load_config",
    "make_optimizer",
    "make_oracle",
    "make_quadratic",
    "markov_check",
    "rate_fit",
    "run_experiment",
    "run_steps",
    "save_config",
    "sweep",
    "theta_w_closed_form_check",
    "update_squared_grads",
    "verify_equivalence",
]

__version__ = "0.1.0"
