"""Stochastic first-order oracles: objective, exact gradient, seeded noise.

Each oracle exposes the deterministic objective (``value``), the exact
gradient (``gradient``), and a noisy gradient channel
``noisy_gradient(z, n) = gradient(z) + sigma * zeta_n`` where zeta_n is drawn
uniformly from the unit sphere. Sphere noise gives ``E||zeta||^2 = 1``
exactly, so variance bounds hold with a known constant instead of an
estimated one. Streams are indexed by (seed, n): replaying a seed reproduces
the identical gradient sequence regardless of scheduling.

The logistic oracle adds mini-batch subsampling as a second, unbiased noise
channel; its ``value``/``gradient`` stay full-batch so diagnostics always see
the true objective.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .vectors import DimensionMismatch, DomainError, ParamVector, as_vector

_NOISE_TAG = 0
_BATCH_TAG = 1


class GradientBoundExceeded(RuntimeError):
    """A declared gradient bound was violated; the oracle never clips silently."""


@dataclass(frozen=True)
class OracleSpec:
    """Declarative description of an oracle, as read from a config file."""

    kind: str  # quadratic | rosenbrock | logistic | csv
    d: int = 2
    sigma: float = 0.0
    seed: int = 0  # noise-stream seed; harness reseeds per run
    problem_seed: int = 0  # seeds the problem data (matrix / dataset)
    grad_bound: float | None = None
    # quadratic
    eig_min: float = 0.5
    eig_max: float = 2.0
    # logistic
    n_samples: int = 400
    batch_size: int | None = None
    class_sep: float = 3.0
    # csv
    csv_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("quadratic", "rosenbrock", "logistic", "csv"):
            raise DomainError(f"unknown oracle kind: {self.kind!r}")
        if self.sigma < 0.0:
            raise DomainError("sigma >= 0 required")
        if self.seed < 0 or self.problem_seed < 0:
            raise DomainError("seeds must be nonnegative")
        if self.grad_bound is not None and self.grad_bound <= 0.0:
            raise DomainError("grad_bound must be positive when declared")


class _OracleBase:
    """Shared noise channel and bound enforcement."""

    kind = "abstract"
    sigma: float
    seed: int
    grad_bound: float | None
    lipschitz: float | None
    f_lower_bound: float | None
    from_csv = False

    @property
    def d(self) -> int:
        raise NotImplementedError

    def value(self, point) -> float:
        raise NotImplementedError

    def gradient(self, point) -> ParamVector:
        raise NotImplementedError

    def _check_point(self, point) -> ParamVector:
        point = as_vector(point)
        if point.size != self.d:
            raise DimensionMismatch(f"point has length {point.size}, oracle is {self.d}-dimensional")
        return point

    def noise(self, n: int) -> ParamVector:
        """sigma * zeta_n with zeta_n uniform on the unit sphere; zeros when sigma = 0."""
        if self.sigma == 0.0:
            return np.zeros(self.d)
        rng = np.random.default_rng([self.seed, n, _NOISE_TAG])
        zeta = rng.standard_normal(self.d)
        norm = np.linalg.norm(zeta)
        while norm == 0.0:  # probability-zero guard
            zeta = rng.standard_normal(self.d)
            norm = np.linalg.norm(zeta)
        return (self.sigma / norm) * zeta

    def noisy_gradient(self, point, n: int) -> ParamVector:
        g = self._stochastic_part(point, n) + self.noise(n)
        if self.grad_bound is not None:
            gnorm = float(np.linalg.norm(g))
            if gnorm > self.grad_bound:
                raise GradientBoundExceeded(
                    f"||g_{n}|| = {gnorm:.6g} exceeds the declared bound {self.grad_bound:.6g}"
                )
        return g

    def _stochastic_part(self, point, n: int) -> ParamVector:
        return self.gradient(point)

    def with_seed(self, seed: int) -> "_OracleBase":
        """Clone sharing the problem data but drawing from a fresh noise stream."""
        clone = copy.copy(self)
        clone.seed = int(seed)
        return clone


class QuadraticOracle(_OracleBase):
    """F(x) = 1/2 x'Ax - b'x with A = Q diag(eigs) Q' built from a seeded rotation.

    The spectrum is prescribed, so the gradient's Lipschitz constant
    (max eigenvalue), the minimizer, and the minimum value are known exactly.
    """

    kind = "quadratic"

    def __init__(self, a_matrix, b, *, eigenvalues, top_eigvec, sigma=0.0, seed=0, grad_bound=None):
        self.a = np.asarray(a_matrix, dtype=np.float64)
        self.b = as_vector(b)
        self.eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        self.top_eigvec = as_vector(top_eigvec)
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.grad_bound = grad_bound
        self.lipschitz = float(np.max(self.eigenvalues))
        self.minimizer = np.linalg.solve(self.a, self.b)
        self.f_lower_bound = float(self._value(self.minimizer))

    @property
    def d(self) -> int:
        return self.b.size

    def _value(self, x) -> float:
        return float(0.5 * (x @ (self.a @ x)) - self.b @ x)

    def value(self, point) -> float:
        return self._value(self._check_point(point))

    def gradient(self, point) -> ParamVector:
        point = self._check_point(point)
        return self.a @ point - self.b


def make_quadratic(
    d: int,
    *,
    eig_min: float = 0.5,
    eig_max: float = 2.0,
    problem_seed: int = 0,
    sigma: float = 0.0,
    seed: int = 0,
    grad_bound: float | None = None,
) -> QuadraticOracle:
    """Random-rotation quadratic with eigenvalues linearly spaced in [eig_min, eig_max]."""
    if d < 1:
        raise DomainError("d >= 1 required")
    if not 0.0 < eig_min <= eig_max:
        raise DomainError("need 0 < eig_min <= eig_max")
    rng = np.random.default_rng(problem_seed)
    eigs = np.linspace(eig_min, eig_max, d)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    a = (q * eigs) @ q.T
    a = 0.5 * (a + a.T)  # exact symmetry
    x_star = rng.standard_normal(d)
    b = a @ x_star
    top = q[:, int(np.argmax(eigs))]
    return QuadraticOracle(
        a, b, eigenvalues=eigs, top_eigvec=top, sigma=sigma, seed=seed, grad_bound=grad_bound
    )


class RosenbrockOracle(_OracleBase):
    """The d-dimensional Rosenbrock valley; minimum 0 at the all-ones point.

    Its gradient is not globally Lipschitz, so ``lipschitz`` stays None and
    bound audits refuse it; it is here for qualitative runs only.
    """

    kind = "rosenbrock"

    def __init__(self, d: int, *, sigma=0.0, seed=0, grad_bound=None):
        if d < 2:
            raise DomainError("rosenbrock needs d >= 2")
        self._d = int(d)
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.grad_bound = grad_bound
        self.lipschitz = None
        self.f_lower_bound = 0.0
        self.minimizer = np.ones(d)

    @property
    def d(self) -> int:
        return self._d

    def value(self, point) -> float:
        x = self._check_point(point)
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def gradient(self, point) -> ParamVector:
        x = self._check_point(point)
        g = np.zeros_like(x)
        diff = x[1:] - x[:-1] ** 2
        g[:-1] = -400.0 * x[:-1] * diff - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * diff
        return g


# ---------------------------------------------------------------------------
# synthetic logistic-regression data


@dataclass(frozen=True)
class DatasetParams:
    n_samples: int = 400
    d: int = 5
    class_sep: float = 3.0
    cov_scale: float = 1.0

    def __post_init__(self):
        if self.n_samples < 2 or self.d < 1:
            raise DomainError("need n_samples >= 2 and d >= 1")
        if self.class_sep == 0.0 and self.cov_scale == 0.0:
            raise DomainError("degenerate dataset: zero variance with coincident means")


@dataclass
class SyntheticDataset:
    """Two-class data with a fixed 80/20 train/validation split."""

    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,) values in {-1, +1}
    n_train: int
    params: DatasetParams | None = None
    seed: int | None = None

    @property
    def train_features(self) -> np.ndarray:
        return self.features[: self.n_train]

    @property
    def train_labels(self) -> np.ndarray:
        return self.labels[: self.n_train]

    @property
    def val_features(self) -> np.ndarray:
        return self.features[self.n_train:]

    @property
    def val_labels(self) -> np.ndarray:
        return self.labels[self.n_train:]


def generate_dataset(params: DatasetParams, seed: int) -> SyntheticDataset:
    """Deterministic Gaussian blobs at +/- (class_sep/2) along the diagonal direction."""
    rng = np.random.default_rng(seed)
    n, d = params.n_samples, params.d
    labels = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    labels = labels[rng.permutation(n)]
    direction = np.ones(d) / math.sqrt(d)
    centers = np.outer(labels, (params.class_sep / 2.0) * direction)
    features = centers + params.cov_scale * rng.standard_normal((n, d))
    n_train = math.ceil(0.8 * n)
    return SyntheticDataset(features=features, labels=labels, n_train=n_train, params=params, seed=seed)


def load_csv_dataset(path: str) -> SyntheticDataset:
    """Read a small dataset: header row, label column named ``y`` (0/1 or +/-1), numeric features."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if "y" not in header:
            raise DomainError("csv dataset needs a label column named 'y'")
        y_col = header.index("y")
        feats, labels = [], []
        for row in reader:
            if not row:
                continue
            vals = [float(x) for x in row]
            labels.append(vals[y_col])
            feats.append([v for i, v in enumerate(vals) if i != y_col])
    features = np.asarray(feats, dtype=np.float64)
    raw = np.asarray(labels, dtype=np.float64)
    mapped = np.where(raw > 0.0, 1.0, -1.0)
    n = features.shape[0]
    if n < 2:
        raise DomainError("csv dataset needs at least two rows")
    return SyntheticDataset(features=features, labels=mapped, n_train=math.ceil(0.8 * n))


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def accuracy(features: np.ndarray, labels: np.ndarray, weights) -> float:
    """Fraction of correct signs of the linear score."""
    scores = features @ as_vector(weights)
    predicted = np.where(scores >= 0.0, 1.0, -1.0)
    return float(np.mean(predicted == labels))


class LogisticOracle(_OracleBase):
    """Mean logistic loss over the training split of a two-class dataset.

    ``gradient`` is the full-batch training gradient; ``noisy_gradient`` draws
    a uniform mini-batch (when batch_size is set) and then adds sphere noise.
    The loss is nonnegative, and the curvature bound gives the exact Lipschitz
    constant lambda_max(X'X) / (4 n).
    """

    kind = "logistic"

    def __init__(self, dataset: SyntheticDataset, *, batch_size=None, sigma=0.0, seed=0, grad_bound=None, from_csv=False):
        self.dataset = dataset
        self.x = dataset.train_features
        self.t = dataset.train_labels
        if batch_size is not None and not 1 <= batch_size <= self.x.shape[0]:
            raise DomainError("batch_size must be in [1, n_train]")
        self.batch_size = batch_size
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.grad_bound = grad_bound
        self.from_csv = from_csv
        gram_top = float(np.linalg.eigvalsh(self.x.T @ self.x)[-1])
        self.lipschitz = gram_top / (4.0 * self.x.shape[0])
        self.f_lower_bound = None if from_csv else 0.0

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def _loss(self, x_mat, t_vec, w) -> float:
        margins = t_vec * (x_mat @ w)
        return float(np.mean(np.logaddexp(0.0, -margins)))

    def _grad(self, x_mat, t_vec, w) -> ParamVector:
        margins = t_vec * (x_mat @ w)
        weights = _sigmoid(-margins)  # d/dm log(1 + e^-m) = -sigmoid(-m)
        return -(x_mat.T @ (t_vec * weights)) / x_mat.shape[0]

    def value(self, point) -> float:
        return self._loss(self.x, self.t, self._check_point(point))

    def gradient(self, point) -> ParamVector:
        return self._grad(self.x, self.t, self._check_point(point))

    def _stochastic_part(self, point, n: int) -> ParamVector:
        point = self._check_point(point)
        if self.batch_size is None:
            return self._grad(self.x, self.t, point)
        rng = np.random.default_rng([self.seed, n, _BATCH_TAG])
        idx = rng.choice(self.x.shape[0], size=self.batch_size, replace=False)
        return self._grad(self.x[idx], self.t[idx], point)

    def declared_grad_bound(self) -> float:
        """A valid gradient bound: max sample norm plus the noise radius."""
        return float(np.max(np.linalg.norm(self.x, axis=1))) + self.sigma


def make_oracle(spec: OracleSpec) -> _OracleBase:
    """Instantiate the oracle described by a spec."""
    if spec.kind == "quadratic":
        return make_quadratic(
            spec.d,
            eig_min=spec.eig_min,
            eig_max=spec.eig_max,
            problem_seed=spec.problem_seed,
            sigma=spec.sigma,
            seed=spec.seed,
            grad_bound=spec.grad_bound,
        )
    if spec.kind == "rosenbrock":
        return RosenbrockOracle(spec.d, sigma=spec.sigma, seed=spec.seed, grad_bound=spec.grad_bound)
    if spec.kind == "logistic":
        params = DatasetParams(n_samples=spec.n_samples, d=spec.d, class_sep=spec.class_sep)
        data = generate_dataset(params, spec.problem_seed)
        return LogisticOracle(
            data, batch_size=spec.batch_size, sigma=spec.sigma, seed=spec.seed, grad_bound=spec.grad_bound
        )
    if spec.kind == "csv":
        if not spec.csv_path:
            raise DomainError("csv oracle needs csv_path")
        data = load_csv_dataset(spec.csv_path)
        return LogisticOracle(
            data,
            batch_size=spec.batch_size,
            sigma=spec.sigma,
            seed=spec.seed,
            grad_bound=spec.grad_bound,
            from_csv=True,
        )
    raise DomainError(f"unknown oracle kind: {spec.kind!r}")


def finite_diff_gradient(oracle, point, h: float) -> ParamVector:
    """Central differences of the noiseless objective, one coordinate at a time."""
    if h <= 0.0:
        raise DomainError("step size h must be positive")
    point = as_vector(point)
    grad = np.zeros_like(point)
    for i in range(point.size):
        bump = np.zeros_like(point)
        bump[i] = h
        grad[i] = (oracle.value(point + bump) - oracle.value(point - bump)) / (2.0 * h)
    return grad
