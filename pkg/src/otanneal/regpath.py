"""Relaxed entropic transport problems along the annealing path.

For a relaxation strength alpha and inverse temperature beta, the asymmetric
point minimizes ``<c, pi> + KL(pi 1|p)/alpha + KL(pi|pi_ref)/beta`` over
plans with column marginal q; its scaling fixed point is

    log a <- s (log p - log(K b)),    log b <- log q - log(K^T a),

with ``K = exp(-beta c) * pi_ref`` and exponent ``s = beta/(alpha+beta)``.
alpha = 0 is the balanced limit (exponent 1, plain Sinkhorn for the entropic
problem); alpha = inf drops the row penalty entirely (exponent 0).

The symmetric mode relaxes both marginals and keeps total mass 1 through a
scalar multiplier refreshed every sweep.

Plain sweeps converge slowly at large beta, so an optional accelerated mode
polishes the fixed point with a damped Newton method on the reduced map in
log a (the exact Jacobian is built from the two softmax matrices of the
kernel), climbing a beta ladder when starting cold.  The returned residual
is always measured by a final plain sweep, so it certifies the fixed point
independently of how it was reached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LogScalings, Plan, Problem, log_sum_exp_axis, osc_norm
from .schedules import Schedule

__all__ = [
    "RegPathPoint",
    "solve_point",
    "solve_point_symmetric",
    "path",
    "lemma4_bound",
    "theorem2_bound",
    "debiased_marginal",
    "online_gap_bound",
]

_CONVERGED_RESIDUAL = 1e-8
# cold Newton starts above this beta climb a sqrt(10)-spaced ladder
_LADDER_BASE = 40.0


@dataclass(frozen=True)
class RegPathPoint:
    """A solved relaxed problem: plan, duals, and fixed-point residual.

    u and v are the log scalings divided by beta.  In symmetric mode the
    plan carries an extra factor ``exp(-log_mass)`` keeping total mass 1;
    log_mass is 0 in asymmetric mode.
    """

    alpha: float
    beta: float
    plan: Plan
    u: np.ndarray
    v: np.ndarray
    residual: float
    log_mass: float = 0.0

    @property
    def converged(self) -> bool:
        return self.residual <= _CONVERGED_RESIDUAL


def _validate_point_args(alpha: float, beta: float, iters: int) -> None:
    if not (alpha >= 0.0):
        raise ValueError(f"alpha must be nonnegative, got {alpha!r}")
    if not (np.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be positive, got {beta!r}")
    if iters < 1:
        raise ValueError(f"iters must be at least 1, got {iters}")


def _exponent(alpha: float, beta: float) -> float:
    if alpha == 0.0:
        return 1.0
    if math.isinf(alpha):
        return 0.0
    return beta / (alpha + beta)


def _warm_scalings(warm: LogScalings | None, beta: float, m: int, n: int):
    # potentials u = log(a)/beta are carried across temperatures
    if warm is None:
        return np.zeros(m), np.zeros(n)
    if warm.u.size != m or warm.v.size != n:
        raise ValueError("warm scalings do not match the instance size")
    return warm.u * beta, warm.v * beta


class _FixedPoint:
    """The scaling fixed point in (log a, log b) and its reduced map in log a."""

    def __init__(self, prob: Problem, alpha: float, beta: float):
        self.lp = np.log(prob.p)
        self.lq = np.log(prob.q)
        self.lref = -math.log(prob.m * prob.n)
        self.bc = beta * prob.cost
        self.s = _exponent(alpha, beta)

    def row_update(self, g: np.ndarray) -> np.ndarray:
        return self.s * (self.lp - log_sum_exp_axis(g[None, :] - self.bc + self.lref, axis=1))

    def col_update(self, f: np.ndarray) -> np.ndarray:
        return self.lq - log_sum_exp_axis(f[:, None] - self.bc + self.lref, axis=0)

    def sweep(self, f: np.ndarray, g: np.ndarray):
        """One (a, b) sweep: a from the old b, then b from the new a."""
        f_new = self.row_update(g)
        return f_new, self.col_update(f_new)

    def full(self, f: np.ndarray):
        """Reduced map T(f) = row_update(col_update(f)) plus its softmaxes.

        The Jacobian of T is ``s * row_soft @ col_soft^T`` where row_soft is
        the row-stochastic softmax of the a-update and col_soft the
        column-stochastic softmax of the b-update.
        """
        col = f[:, None] - self.bc + self.lref
        lse_col = log_sum_exp_axis(col, axis=0)
        g = self.lq - lse_col
        row = g[None, :] - self.bc + self.lref
        lse_row = log_sum_exp_axis(row, axis=1)
        f_new = self.s * (self.lp - lse_row)
        row_soft = np.exp(row - lse_row[:, None])
        col_soft = np.exp(col - lse_col[None, :])
        return f_new, g, row_soft, col_soft


def _newton_polish(fp: _FixedPoint, f: np.ndarray, tol: float, max_steps: int = 200):
    """Damped Newton on ``T(f) - f = 0``; falls back to plain sweeps.

    For the balanced case (exponent 1) the Jacobian is singular along the
    constant shift, so the step is the least-squares minimum-norm solution.
    """
    f_new, g, row_soft, col_soft = fp.full(f)
    residual = float(np.abs(f_new - f).max())
    balanced = fp.s == 1.0
    for _ in range(max_steps):
        if residual <= tol:
            break
        jac = fp.s * (row_soft @ col_soft.T)
        np.fill_diagonal(jac, jac.diagonal() - 1.0)
        rhs = f - f_new
        if balanced:
            delta = np.linalg.lstsq(jac, rhs, rcond=None)[0]
        else:
            delta = np.linalg.solve(jac, rhs)
        step = 1.0
        accepted = False
        while step > 1e-8:
            trial = f + step * delta
            t_new, t_g, t_row, t_col = fp.full(trial)
            t_res = float(np.abs(t_new - trial).max())
            if t_res < residual * (1.0 - 1e-4 * step) or t_res < tol:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # plain sweep still contracts when the Newton model is poor
            trial = f_new
            t_new, t_g, t_row, t_col = fp.full(trial)
            t_res = float(np.abs(t_new - trial).max())
        f, f_new, g, row_soft, col_soft, residual = trial, t_new, t_g, t_row, t_col, t_res
    return f, g, residual


def _solve_asymmetric(
    prob: Problem,
    alpha: float,
    beta: float,
    warm: LogScalings | None,
    iters: int,
    accelerate: bool,
    target: float,
):
    f, g = _warm_scalings(warm, beta, prob.m, prob.n)
    fp = _FixedPoint(prob, alpha, beta)
    residual = np.inf
    cold_ladder = accelerate and warm is None and beta > _LADDER_BASE
    if not cold_ladder:
        for _ in range(iters):
            f_new, g = fp.sweep(f, g)
            residual = float(np.abs(f_new - f).max())
            f = f_new
    if accelerate and residual > target:
        if cold_ladder:
            # climb cold starts through increasing temperatures
            rungs = []
            b = beta
            while b > _LADDER_BASE * (1.0 + 1e-9):
                rungs.append(b)
                b /= math.sqrt(10.0)
            rungs.append(b)
            rungs.reverse()
            for rung in rungs:
                fp_r = _FixedPoint(prob, alpha, rung)
                for _ in range(30):
                    f = fp_r.full(f)[0]
                f, _, _ = _newton_polish(
                    fp_r, f, tol=(target / 10.0 if rung == beta else 1e-9)
                )
                if rung != beta:
                    f = f * (min(rung * math.sqrt(10.0), beta) / rung)
        else:
            f, _, _ = _newton_polish(fp, f, tol=target / 10.0)
        # certify with one plain application of the reduced map, then pair
        # the accepted log a with its exact column update
        f_new = fp.full(f)[0]
        residual = float(np.abs(f_new - f).max())
        f = f_new
        g = fp.col_update(f)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise FloatingPointError("non-finite scalings in relaxed solve")
    return f, g, residual


def solve_point(
    prob: Problem,
    alpha: float,
    beta: float,
    warm: LogScalings | None = None,
    iters: int = 100,
    accelerate: bool = False,
    target: float = 1e-10,
) -> RegPathPoint:
    """Solve one relaxed problem with column marginal held at q.

    Args:
        prob: the instance.
        alpha: row-relaxation strength; 0 is the balanced limit, inf drops
            the row penalty.
        beta: inverse temperature.
        warm: starting potentials from a nearby point.
        iters: plain fixed-point sweeps to run.
        accelerate: polish beyond the sweeps until the certified residual
            is at most ``target``.
        target: accelerated-mode residual goal.

    Returns:
        The point; `residual` is the last sweep's max change of log a, and
        points with residual above 1e-8 are flagged via ``converged``.
    """
    _validate_point_args(alpha, beta, iters)
    f, g, residual = _solve_asymmetric(prob, alpha, beta, warm, iters, accelerate, target)
    if alpha == 0.0:
        # balanced duals are defined up to a shift; pin u_1 = 0
        shift = f[0]
        f = f - shift
        g = g + shift
    u = f / beta
    v = g / beta
    with np.errstate(over="ignore"):
        matrix = np.exp(f[:, None] + g[None, :] - beta * prob.cost) / (prob.m * prob.n)
    if not np.all(np.isfinite(matrix)):
        raise FloatingPointError("plan overflow in relaxed solve")
    return RegPathPoint(
        alpha=float(alpha), beta=float(beta), plan=Plan(matrix), u=u, v=v,
        residual=residual,
    )


def solve_point_symmetric(
    prob: Problem,
    alpha: float,
    beta: float,
    warm: LogScalings | None = None,
    iters: int = 100,
    accelerate: bool = False,
    target: float = 1e-10,
) -> RegPathPoint:
    """Solve the doubly relaxed problem on the simplex of plans.

    Both marginals are penalized at strength alpha; a scalar mass
    multiplier, refreshed every sweep, keeps the plan's total mass at 1.
    The returned u, v satisfy the marginal relations of the doubly relaxed
    optimality system; the plan is ``exp(beta(u + v - c) - log_mass)`` times
    the reference plan.

    The accelerated mode simply runs more sweeps (the symmetric map is used
    at moderate beta only, where plain sweeps converge fast).
    """
    _validate_point_args(alpha, beta, iters)
    lp, lq = np.log(prob.p), np.log(prob.q)
    lref = -math.log(prob.m * prob.n)
    bc = beta * prob.cost
    s = _exponent(alpha, beta)
    f, g = _warm_scalings(warm, beta, prob.m, prob.n)
    gamma = float(log_sum_exp_axis((f[:, None] + g[None, :] - bc + lref).reshape(1, -1), 1)[0])

    def sweep(f, g, gamma):
        f = s * (lp - log_sum_exp_axis(g[None, :] - bc + lref, axis=1) + gamma)
        g = s * (lq - log_sum_exp_axis(f[:, None] - bc + lref, axis=0) + gamma)
        gamma = float(log_sum_exp_axis((f[:, None] + g[None, :] - bc + lref).reshape(1, -1), 1)[0])
        return f, g, gamma

    residual = np.inf
    budget = iters if not accelerate else max(iters, 100000)
    for k in range(budget):
        f_new, g, gamma = sweep(f, g, gamma)
        residual = float(np.abs(f_new - f).max())
        f = f_new
        if accelerate and residual <= target and k + 1 >= iters:
            break
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g)) and np.isfinite(gamma)):
        raise FloatingPointError("non-finite scalings in symmetric relaxed solve")
    if alpha == 0.0:
        # shifts of either dual are absorbed by the mass multiplier
        gamma = gamma - f[0] - g[0]
        f = f - f[0]
        g = g - g[0]
    with np.errstate(over="ignore"):
        matrix = np.exp(f[:, None] + g[None, :] - bc - gamma) / (prob.m * prob.n)
    if not np.all(np.isfinite(matrix)):
        raise FloatingPointError("plan overflow in symmetric relaxed solve")
    return RegPathPoint(
        alpha=float(alpha), beta=float(beta), plan=Plan(matrix),
        u=f / beta, v=g / beta, residual=residual, log_mass=gamma,
    )


def path(
    prob: Problem,
    sched: Schedule,
    ts,
    high_accuracy: bool = False,
    symmetric: bool = False,
) -> list[RegPathPoint]:
    """Solve the relaxed problems at (alpha_t, beta_t) along a schedule.

    Each point warm-starts from the previous one; the first point gets 100
    sweeps and later points 50.  With high_accuracy, points are further
    polished until the certified residual is at most 1e-10.

    Args:
        prob: the instance.
        sched: the annealing schedule supplying (alpha_t, beta_t).
        ts: strictly increasing iteration indices, all >= 1.
        high_accuracy: converge each point to residual <= 1e-10.
        symmetric: solve the doubly relaxed problems instead.

    Returns:
        One RegPathPoint per entry of ts.
    """
    ts = [int(t) for t in ts]
    if not ts:
        raise ValueError("ts must be nonempty")
    if any(t < 1 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("ts must be strictly increasing and at least 1")
    solver = solve_point_symmetric if symmetric else solve_point
    points: list[RegPathPoint] = []
    warm: LogScalings | None = None
    for k, t in enumerate(ts):
        alpha = sched.alpha_at(t)
        beta = sched.beta_at(t)
        point = solver(
            prob, alpha, beta, warm=warm,
            iters=100 if k == 0 else 50,
            accelerate=high_accuracy, target=1e-10,
        )
        points.append(point)
        warm = LogScalings(u=point.u, v=point.v, beta=beta)
    return points


def _relaxation_factor(alpha: float, beta: float) -> float:
    if alpha == 0.0:
        return 0.0
    if math.isinf(alpha):
        return beta
    return alpha * beta / (alpha + beta)


def lemma4_bound(alpha: float, beta: float, p: np.ndarray, c: np.ndarray) -> float:
    """Bound on the row-marginal error of a relaxed solution.

    Returns ``(2 alpha beta / (alpha + beta)) (4 |log p|_inf / beta + osc(c))``.
    """
    if alpha < 0.0 or not (np.isfinite(beta) and beta > 0.0):
        raise ValueError(f"need alpha >= 0 and beta > 0, got ({alpha!r}, {beta!r})")
    p = np.asarray(p, dtype=np.float64)
    return 2.0 * _relaxation_factor(alpha, beta) * (
        4.0 * float(np.abs(np.log(p)).max()) / beta + osc_norm(c)
    )


def theorem2_bound(
    alpha: float, beta: float, m: int, n: int, p: np.ndarray, c: np.ndarray
) -> float:
    """Suboptimality certificate for the annealed path at (alpha, beta).

    Entropic term ``log(mn)/beta`` plus four times the marginal-error bound:
    ``(8 alpha beta/(alpha+beta)) (4 |log p|_inf / beta + osc(c))``.
    """
    if alpha < 0.0 or not (np.isfinite(beta) and beta > 0.0):
        raise ValueError(f"need alpha >= 0 and beta > 0, got ({alpha!r}, {beta!r})")
    p = np.asarray(p, dtype=np.float64)
    return math.log(m * n) / beta + 8.0 * _relaxation_factor(alpha, beta) * (
        4.0 * float(np.abs(np.log(p)).max()) / beta + osc_norm(c)
    )


def debiased_marginal(p: np.ndarray, u_t: np.ndarray, alpha_t: float) -> np.ndarray:
    """First marginal reweighted by the dual: ``e^{alpha u} p`` normalized.

    Solving the relaxed problem with this marginal cancels the first-order
    relaxation bias, leaving a marginal error of smaller order than alpha.
    """
    if alpha_t < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha_t!r}")
    p = np.asarray(p, dtype=np.float64)
    u_t = np.asarray(u_t, dtype=np.float64)
    if not np.all(np.isfinite(u_t)):
        raise ValueError("dual vector must be finite")
    with np.errstate(over="ignore"):
        w = np.exp(alpha_t * u_t) * p
    if not np.all(np.isfinite(w)):
        raise ValueError("overflow in the debiased reweighting")
    return w / w.sum()


def online_gap_bound(alpha: float, beta: float, m: int, n: int) -> float:
    """Scale ``sqrt(2 alpha log(mn) / beta)`` of the online-vs-path gap."""
    if alpha < 0.0 or beta <= 0.0:
        raise ValueError(f"need alpha >= 0 and beta > 0, got ({alpha!r}, {beta!r})")
    return math.sqrt(2.0 * alpha * math.log(m * n) / beta)
