"""Projection of an approximate plan onto the transport polytope.

Scales rows down to at most the target row marginal, then columns likewise,
and spreads the missing mass as a rank-one correction.  The projection moves
the plan by at most its marginal violations in l1, which turns any
near-feasible plan with a good cost into a feasible plan with a certified
cost increase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Plan, Problem, osc_norm

__all__ = ["RoundingResult", "round_to_polytope", "lemma3_certificate"]

# below this much missing mass the rank-one correction is numerically
# meaningless, so the scaled plan is returned as-is
_MASS_EPS = 1e-14


@dataclass(frozen=True)
class RoundingResult:
    """A rounded plan plus the residual marginals it absorbed.

    delta_p and delta_q are the row and column mass missing after the two
    scaling passes; both carry the same total mass, spread back into the
    plan as a rank-one term.
    """

    plan: Plan
    delta_p: np.ndarray
    delta_q: np.ndarray
    l1_correction: float


def _scale_factors(target: np.ndarray, actual: np.ndarray) -> np.ndarray:
    # target / 0 counts as +inf so empty rows or columns are left alone
    with np.errstate(divide="ignore"):
        ratio = np.where(actual > 0.0, target / np.where(actual > 0.0, actual, 1.0), np.inf)
    return np.minimum(1.0, ratio)


def round_to_polytope(pi: Plan, p: np.ndarray, q: np.ndarray) -> RoundingResult:
    """Round a nonnegative plan onto the polytope with marginals (p, q).

    Rows are scaled down to at most p, columns to at most q, and the missing
    mass is restored by the rank-one update ``delta_p delta_q^T / |delta_p|_1``.

    Args:
        pi: plan with positive total mass.
        p: positive row marginal.
        q: positive column marginal.

    Returns:
        RoundingResult whose plan has row sums p and column sums q.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    x = pi.matrix
    if x.shape != (p.size, q.size):
        raise ValueError(f"plan shape {x.shape} does not match marginals ({p.size}, {q.size})")
    if x.sum() <= 0.0:
        raise ValueError("plan must carry positive mass")
    y = x * _scale_factors(p, x.sum(axis=1))[:, None]
    y = y * _scale_factors(q, y.sum(axis=0))[None, :]
    # residual marginals; clip tiny negatives left by cancellation
    delta_p = np.maximum(p - y.sum(axis=1), 0.0)
    delta_q = np.maximum(q - y.sum(axis=0), 0.0)
    missing = float(delta_p.sum())
    if missing >= _MASS_EPS:
        y = y + np.outer(delta_p, delta_q) / missing
    return RoundingResult(plan=Plan(y), delta_p=delta_p, delta_q=delta_q, l1_correction=missing)


def lemma3_certificate(pi: Plan, beta: float, prob: Problem, ot_value: float) -> tuple[float, float]:
    """Suboptimality certificate for the rounded plan.

    Args:
        pi: plan of scaling form produced at inverse temperature beta.
        beta: the inverse temperature.
        prob: the instance.
        ot_value: unregularized optimum from the exact oracle.

    Returns:
        ``(lhs, rhs)`` with lhs the rounded plan's suboptimality
        ``<c, round(pi)> - ot_value`` and rhs the certificate
        ``log(mn)/beta + 4 (|pi 1 - p|_1 + |pi^T 1 - q|_1) osc(c)``;
        lhs <= rhs + 1e-8 for plans of scaling form.
    """
    if not (np.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be positive, got {beta!r}")
    rounded = round_to_polytope(pi, prob.p, prob.q)
    lhs = float((prob.cost * rounded.plan.matrix).sum()) - ot_value
    l1_p = float(np.abs(pi.matrix.sum(axis=1) - prob.p).sum())
    l1_q = float(np.abs(pi.matrix.sum(axis=0) - prob.q).sum())
    rhs = np.log(prob.m * prob.n) / beta + 4.0 * (l1_p + l1_q) * osc_norm(prob.cost)
    return lhs, float(rhs)
