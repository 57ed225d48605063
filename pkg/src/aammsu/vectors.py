"""Dense float64 vector kernel with entrywise (Hadamard) algebra.

Every optimizer in this package does its arithmetic componentwise on 1-d
float64 arrays; this module is the single substrate for that. Operations on
finite inputs never produce NaN: domain violations (length mismatch, zero
divisor, negative operand to sqrt) raise instead of propagating garbage, so
optimizer bugs surface at the faulting step.

Vectors are plain ``numpy.ndarray`` values. Callers own their arrays; nothing
here keeps references or mutates arguments.
"""

from __future__ import annotations

import numpy as np

ParamVector = np.ndarray


class DimensionMismatch(ValueError):
    """Binary operation on vectors of different lengths."""


class DomainError(ValueError):
    """Operand outside the mathematical domain of the operation."""


def as_vector(data) -> ParamVector:
    """Coerce to a 1-d float64 array of length >= 1."""
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1:
        raise DomainError(f"expected a 1-d vector, got shape {v.shape}")
    if v.size < 1:
        raise DomainError("vectors must have length >= 1")
    return v


def _pair(u, v) -> tuple[ParamVector, ParamVector]:
    u = as_vector(u)
    v = as_vector(v)
    if u.size != v.size:
        raise DimensionMismatch(f"length mismatch: {u.size} vs {v.size}")
    return u, v


def hadamard_mul(u, v) -> ParamVector:
    """Componentwise product u[i]*v[i]."""
    u, v = _pair(u, v)
    return u * v


def hadamard_div(u, v) -> ParamVector:
    """Componentwise quotient u[i]/v[i]; every v[i] must be nonzero."""
    u, v = _pair(u, v)
    if np.any(v == 0.0):
        raise DomainError("division by a zero component")
    return u / v


def elementwise_square(u) -> ParamVector:
    return as_vector(u) ** 2


def elementwise_sqrt(u) -> ParamVector:
    u = as_vector(u)
    if np.any(u < 0.0):
        raise DomainError("sqrt of a negative component")
    return np.sqrt(u)


def elementwise_abs(u) -> ParamVector:
    return np.abs(as_vector(u))


def elementwise_max(u, v) -> ParamVector:
    """Componentwise maximum."""
    u, v = _pair(u, v)
    return np.maximum(u, v)


def axpy_scalar(a: float, u, b: float, v) -> ParamVector:
    """a*u + b*v for scalars a, b."""
    u, v = _pair(u, v)
    return a * u + b * v


def add_scalar(u, rho: float) -> ParamVector:
    """u + rho applied to every component."""
    return as_vector(u) + rho


def scale(u, rho: float) -> ParamVector:
    return rho * as_vector(u)


def norm2(u) -> float:
    """Euclidean norm."""
    return float(np.linalg.norm(as_vector(u)))


def dot(u, v) -> float:
    u, v = _pair(u, v)
    return float(u @ v)


def all_leq_scalar(u, rho: float) -> bool:
    """True iff u[i] <= rho for every i."""
    return bool(np.all(as_vector(u) <= rho))


def all_geq(u, v) -> bool:
    """True iff u[i] >= v[i] for every i."""
    u, v = _pair(u, v)
    return bool(np.all(u >= v))
