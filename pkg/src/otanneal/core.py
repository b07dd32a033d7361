"""Numeric primitives and domain types shared by every solver.

Conventions used throughout the package:

* marginals ``p`` and ``q`` live on the tipless simplex (strictly positive,
  summing to one);
* the reference plan defaults to the uniform matrix ``(mn)^{-1} 1 1^T``;
* ``0 * log 0 = 0`` inside Kullback-Leibler sums.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Problem",
    "Plan",
    "LogScalings",
    "kl_divergence",
    "osc_norm",
    "log_sum_exp",
    "log_sum_exp_axis",
    "plan_from_scalings",
    "uniform_reference",
]

_SIMPLEX_TOL = 1e-12


def _vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Problem:
    """An optimal transport instance: cost matrix and two positive marginals."""

    cost: np.ndarray
    p: np.ndarray
    q: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        cost = np.asarray(self.cost, dtype=np.float64)
        p = _vector(self.p, "p")
        q = _vector(self.q, "q")
        if cost.ndim != 2:
            raise ValueError(f"cost must be 2-d, got shape {cost.shape}")
        if cost.shape != (p.size, q.size):
            raise ValueError(
                f"cost shape {cost.shape} does not match marginals ({p.size}, {q.size})"
            )
        if not np.all(np.isfinite(cost)):
            raise ValueError("cost entries must be finite")
        for name, w in (("p", p), ("q", q)):
            if not np.all(w > 0.0):
                raise ValueError(f"{name} must be strictly positive")
            if abs(w.sum() - 1.0) > _SIMPLEX_TOL:
                raise ValueError(f"{name} must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        return self.cost.shape[0]

    @property
    def n(self) -> int:
        return self.cost.shape[1]


@dataclass(frozen=True)
class Plan:
    """A nonnegative transport plan (not necessarily with matched marginals)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.size == 0:
            raise ValueError(f"plan must be a nonempty matrix, got shape {matrix.shape}")
        if np.any(matrix < 0.0):
            raise ValueError("plan entries must be nonnegative")
        if not np.isfinite(matrix.sum()):
            raise ValueError("plan mass must be finite")
        object.__setattr__(self, "matrix", matrix)

    @property
    def row_marginal(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def mass(self) -> float:
        return float(self.matrix.sum())


@dataclass(frozen=True)
class LogScalings:
    """Log-domain potentials (u, v) at inverse temperature beta.

    The induced plan entry is ``exp(beta * (u_i + v_j - c_ij)) * pi_ref_ij``,
    so (u, v) are the scaled logarithms of the diagonal scalings.
    """

    u: np.ndarray
    v: np.ndarray
    beta: float

    def __post_init__(self) -> None:
        u = _vector(self.u, "u")
        v = _vector(self.v, "v")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("scalings must be finite")
        if not (np.isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "beta", float(self.beta))


def uniform_reference(m: int, n: int) -> np.ndarray:
    """The uniform reference plan ``(mn)^{-1} 1 1^T``."""
    return np.full((m, n), 1.0 / (m * n))


def kl_divergence(a, b) -> float:
    """Unnormalized Kullback-Leibler divergence ``sum a log(a/b) - a + b``.

    Args:
        a: nonnegative vector or matrix.
        b: strictly positive vector or matrix of the same shape.

    Returns:
        The divergence, a nonnegative scalar; ``0 log 0`` counts as zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if np.any(b <= 0.0):
        raise ValueError("second argument must be strictly positive")
    if np.any(a < 0.0):
        raise ValueError("first argument must be nonnegative")
    mask = a > 0.0
    entropy = float(np.sum(a[mask] * np.log(a[mask] / b[mask])))
    return entropy - float(a.sum()) + float(b.sum())


def osc_norm(c) -> float:
    """Oscillation seminorm: largest entry minus smallest entry."""
    c = np.asarray(c, dtype=np.float64)
    if c.size == 0:
        raise ValueError("empty matrix has no oscillation norm")
    if not np.all(np.isfinite(c)):
        raise ValueError("entries must be finite")
    return float(c.max() - c.min())


def log_sum_exp(x) -> float:
    """Stabilized ``log sum exp`` of a vector.

    Entries may be ``-inf`` (zero mass); if all of them are, the result is
    ``-inf`` by convention, signalling an all-zero kernel row.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"expected a nonempty vector, got shape {x.shape}")
    if np.any(np.isnan(x)) or np.any(x == np.inf):
        raise ValueError("entries must lie in [-inf, +inf)")
    m = float(x.max())
    if m == -np.inf:
        return -np.inf
    return m + float(np.log(np.sum(np.exp(x - m))))


def log_sum_exp_axis(mat: np.ndarray, axis: int) -> np.ndarray:
    """Row- or column-wise stabilized ``log sum exp`` of a matrix."""
    m = np.max(mat, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.squeeze(safe, axis=axis) + np.log(np.sum(np.exp(mat - safe), axis=axis))
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, -np.inf)


def plan_from_scalings(s: LogScalings, prob: Problem, pi_ref: np.ndarray | None = None) -> Plan:
    """Materialize the plan induced by log-domain scalings.

    Args:
        s: the scalings (u, v, beta).
        prob: the instance providing the cost matrix.
        pi_ref: reference plan; defaults to the uniform matrix.

    Returns:
        The plan with entries ``exp(beta (u_i + v_j - c_ij)) pi_ref_ij``.
    """
    if s.u.size != prob.m or s.v.size != prob.n:
        raise ValueError(
            f"scalings of size ({s.u.size}, {s.v.size}) do not match problem "
            f"({prob.m}, {prob.n})"
        )
    if pi_ref is None:
        pi_ref = uniform_reference(prob.m, prob.n)
    exponent = s.beta * (s.u[:, None] + s.v[None, :] - prob.cost)
    with np.errstate(over="ignore"):
        matrix = np.exp(exponent) * pi_ref
    if not np.all(np.isfinite(matrix)):
        raise ValueError("plan entries overflow: divergent scalings")
    return Plan(matrix)
