"""Exact transport oracle and diagnostic evaluators.

The oracle solves the transportation linear program with a dual-simplex
method and recovers Kantorovich potentials from the equality-constraint
duals.  The evaluators measure how far iterates sit from the optimality
systems they are meant to satisfy: the dual fixed-point equations of the
entropic problem, the mirror-descent inequalities of annealed runs, and
potential convergence modulo the constant-shift ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .core import LogScalings, Plan, Problem, kl_divergence, log_sum_exp_axis
from .problems import uniform01
from .schedules import Schedule, validate_concave
from .solvers import RunRecord

__all__ = [
    "ExactSolution",
    "OmdReport",
    "dual_uniqueness_probe",
    "exact_ot",
    "omd_check",
    "potential_seminorm",
    "schrodinger_residual",
]

# Desk-scale guard: the dense LP has m*n variables.
_MAX_CELLS = 10**6
_MARGINAL_TOL = 1e-9
_MONOTONE_TOL = 1e-10
_REGRET_TOL = 1e-8
_POINTWISE_TOL = 1e-8
_PROBE_SEED = 12345
_PROBE_SCALE = 1e-9
_PROBE_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ExactSolution:
    """Primal-dual solution of the transportation linear program.

    The plan is a vertex of the transport polytope; the potentials (u, v)
    satisfy u_i + v_j <= c_ij everywhere with equality on the support of
    the plan, and <p, u> + <q, v> equals the optimal value.
    """

    value: float
    plan: Plan
    potentials: tuple[np.ndarray, np.ndarray]


def exact_ot(prob: Problem) -> ExactSolution:
    """Solve the transportation LP exactly.

    Args:
        prob: instance with matched marginal masses and at most 10^6
            cost cells.

    Returns:
        Optimal value, a vertex plan, and dual potentials.

    Raises:
        ValueError: the instance is too large, or the marginal masses
            differ by more than 1e-9 (infeasible program).
        RuntimeError: the underlying solver reports a failure.
    """
    m, n = prob.m, prob.n
    if m * n > _MAX_CELLS:
        raise ValueError(f"instance too large for the exact oracle: {m}x{n}")
    if abs(float(prob.p.sum()) - float(prob.q.sum())) > _MARGINAL_TOL:
        raise ValueError("marginal masses differ: the program is infeasible")
    cells = np.arange(m * n)
    rows = np.concatenate([np.repeat(np.arange(m), n), m + np.tile(np.arange(n), m)])
    cols = np.concatenate([cells, cells])
    a_eq = sparse.coo_matrix(
        (np.ones(2 * m * n), (rows, cols)), shape=(m + n, m * n)
    ).tocsr()
    b_eq = np.concatenate([prob.p, prob.q])
    res = linprog(
        prob.cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds"
    )
    if res.status != 0:
        raise RuntimeError(f"exact transport solve failed: {res.message}")
    plan = Plan(np.maximum(res.x.reshape(m, n), 0.0))
    duals = np.asarray(res.eqlin.marginals, dtype=np.float64)
    return ExactSolution(
        value=float(res.fun), plan=plan, potentials=(duals[:m].copy(), duals[m:].copy())
    )


def potential_seminorm(u1, v1, u2, v2) -> float:
    """Shift-invariant distance between two dual potential pairs.

    Minimizes ``||u1 - u2 - lam||_inf + ||v1 - v2 + lam||_inf`` over the
    scalar lam.  Each summand is a vee-shaped piecewise-linear function
    of lam, so the minimum is attained at one of the two vertices and the
    evaluation is exact.

    Args:
        u1: first row potential.
        v1: first column potential.
        u2: second row potential, same length as u1.
        v2: second column potential, same length as v1.

    Returns:
        The seminorm; zero iff the pairs coincide up to a conserved shift.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    if u1.shape != u2.shape or v1.shape != v2.shape:
        raise ValueError("potential lengths do not match")
    d = u1 - u2
    e = v1 - v2
    best = np.inf
    for lam in ((d.max() + d.min()) / 2.0, -(e.max() + e.min()) / 2.0):
        best = min(best, float(np.abs(d - lam).max() + np.abs(e + lam).max()))
    return best


def schrodinger_residual(s: LogScalings, prob: Problem, beta: float | None = None) -> float:
    """l-infinity residual of the dual fixed-point system at (u, v).

    The system couples the potentials through soft minima of the cost:
    ``u_i = (log(m n p_i) - lse_j(beta (v_j - c_ij))) / beta`` and
    symmetrically for v.  It vanishes exactly at the entropic optimum for
    the marginals (p, q), so the residual of a constant-schedule run
    decays to zero.

    Args:
        s: log-domain potentials.
        prob: instance supplying the cost and marginals.
        beta: inverse temperature of the system; defaults to the one
            carried by the scalings.

    Returns:
        Maximum of the two equation residuals, in the potential scale.
    """
    if s.u.size != prob.m or s.v.size != prob.n:
        raise ValueError(
            f"scalings of size ({s.u.size}, {s.v.size}) do not match problem "
            f"({prob.m}, {prob.n})"
        )
    b = s.beta if beta is None else float(beta)
    if not (np.isfinite(b) and b > 0.0):
        raise ValueError(f"beta must be positive, got {beta!r}")
    lmn = np.log(prob.m * prob.n)
    rhs_u = (
        np.log(prob.p) + lmn - log_sum_exp_axis(b * (s.v[None, :] - prob.cost), axis=1)
    ) / b
    rhs_v = (
        np.log(prob.q) + lmn - log_sum_exp_axis(b * (s.u[:, None] - prob.cost), axis=0)
    ) / b
    return float(max(np.abs(s.u - rhs_u).max(), np.abs(s.v - rhs_v).max()))


def dual_uniqueness_probe(prob: Problem, sol: ExactSolution | None = None) -> bool:
    """Heuristic test that the exact dual is unique up to a shift.

    Re-solves the LP after a deterministic 1e-9 cost perturbation and
    compares the potentials in the shift-invariant seminorm.  A stable
    dual moves by an amount comparable to the perturbation; a degenerate
    one may jump to a different vertex of the dual polyhedron.

    Args:
        prob: the instance.
        sol: unperturbed solution, recomputed when omitted.

    Returns:
        True when the potentials moved by less than 1e-6.
    """
    if sol is None:
        sol = exact_ot(prob)
    noise = uniform01(_PROBE_SEED, np.arange(prob.m * prob.n)).reshape(prob.m, prob.n)
    bumped = Problem(prob.cost + _PROBE_SCALE * noise, prob.p, prob.q)
    probe = exact_ot(bumped)
    u1, v1 = sol.potentials
    u2, v2 = probe.potentials
    return potential_seminorm(u1, v1, u2, v2) < _PROBE_THRESHOLD


@dataclass(frozen=True)
class OmdReport:
    """Outcome of the mirror-descent inequality checks on one run.

    Slacks are right-hand side minus left-hand side, minimized over the
    run, so nonnegative means the inequality held throughout; a violation
    field carries the first iteration whose slack fell below the check's
    tolerance.  When the schedule fails the concavity precondition every
    check is skipped: slacks are nan and no violations are flagged.
    """

    t_max: int
    concave: bool
    monotone_slack: float
    monotone_violation: int | None
    regret_slack: float
    regret_violation: int | None
    pointwise_slack: float
    pointwise_violation: int | None

    @property
    def passed(self) -> bool:
        return (
            self.monotone_violation is None
            and self.regret_violation is None
            and self.pointwise_violation is None
        )


def omd_check(
    run: list[RunRecord],
    prob: Problem,
    sched: Schedule,
    reference_plan: Plan,
) -> OmdReport:
    """Verify the mirror-descent inequalities along a recorded run.

    Each iterate is one online mirror-descent step on the loss
    ``F_t(pi) = alpha_t <c', pi> + KL(pi 1 | p)`` with the shifted cost
    ``c' = c - min(c)`` and initial plan ``exp(-beta_0 c')`` (iterates are
    invariant under the shift, the bounds are stated for nonnegative
    costs).  For concave schedules three inequalities are checked at
    every t: monotone decrease ``F_t(pi_t) <= F_t(pi_{t-1})``, the
    averaged regret bound ``(1/t) sum_k (F_k(pi_k) - F_k(ref)) <=
    KL(ref|pi_0)/t``, and the pointwise bound on ``F_t(pi_t)`` with the
    ``(beta_t - beta_0)/t`` cost term.  Non-concave schedules skip all
    checks.

    Args:
        run: records at every iteration t = 1..T with plans retained.
        prob: the instance.
        sched: the schedule that produced the run.
        reference_plan: comparison plan whose column marginal is q.

    Returns:
        Report with minimum slacks and first violated iterations.

    Raises:
        ValueError: records are missing plans or not consecutive from
            t = 1, the schedule does not reproduce the recorded betas, or
            the reference plan leaves the column-constrained set.
    """
    if not run:
        raise ValueError("run is empty")
    for k, rec in enumerate(run):
        if rec.t != k + 1:
            raise ValueError(
                f"records must cover t = 1..T consecutively, got t={rec.t} at index {k}"
            )
        if rec.plan is None:
            raise ValueError(f"record at t={rec.t} has no plan; rerun with keep_plans")
        if abs(rec.beta - sched.beta_at(rec.t)) > 1e-9 * max(1.0, abs(rec.beta)):
            raise ValueError(f"schedule does not match the recorded beta at t={rec.t}")
    if float(np.abs(reference_plan.col_marginal - prob.q).sum()) > _MARGINAL_TOL:
        raise ValueError("reference plan must have column marginal q")
    t_max = run[-1].t
    if not validate_concave(sched, max(t_max, 2)):
        nan = float("nan")
        return OmdReport(
            t_max=t_max,
            concave=False,
            monotone_slack=nan,
            monotone_violation=None,
            regret_slack=nan,
            regret_violation=None,
            pointwise_slack=nan,
            pointwise_violation=None,
        )

    c_shift = prob.cost - prob.cost.min()
    beta0 = sched.beta_at(0)
    pi_prev = np.exp(-beta0 * c_shift)
    ref = reference_plan.matrix
    ref_cost = float((c_shift * ref).sum())
    ref_row_kl = kl_divergence(ref.sum(axis=1), prob.p)
    ref_init_kl = kl_divergence(ref, pi_prev)

    cost_prev = float((c_shift * pi_prev).sum())
    kl_prev = kl_divergence(pi_prev.sum(axis=1), prob.p)
    mono_min = reg_min = pw_min = np.inf
    mono_viol = reg_viol = pw_viol = None
    gap_sum = 0.0
    for rec in run:
        t = rec.t
        beta_t = sched.beta_at(t)
        alpha = beta_t - sched.beta_at(t - 1)
        pi = rec.plan.matrix
        cost_cur = float((c_shift * pi).sum())
        kl_cur = kl_divergence(pi.sum(axis=1), prob.p)
        f_cur = alpha * cost_cur + kl_cur

        mono = (alpha * cost_prev + kl_prev) - f_cur
        if mono < mono_min:
            mono_min = mono
        if mono < -_MONOTONE_TOL and mono_viol is None:
            mono_viol = t

        gap_sum += f_cur - (alpha * ref_cost + ref_row_kl)
        reg = (ref_init_kl - gap_sum) / t
        if reg < reg_min:
            reg_min = reg
        if reg < -_REGRET_TOL and reg_viol is None:
            reg_viol = t

        pw = ref_row_kl + ((beta_t - beta0) / t) * ref_cost + ref_init_kl / t - f_cur
        if pw < pw_min:
            pw_min = pw
        if pw < -_POINTWISE_TOL and pw_viol is None:
            pw_viol = t

        cost_prev, kl_prev = cost_cur, kl_cur
    return OmdReport(
        t_max=t_max,
        concave=True,
        monotone_slack=float(mono_min),
        monotone_violation=mono_viol,
        regret_slack=float(reg_min),
        regret_violation=reg_viol,
        pointwise_slack=float(pw_min),
        pointwise_violation=pw_viol,
    )
