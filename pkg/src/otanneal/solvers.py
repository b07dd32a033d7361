"""Log-domain Sinkhorn iterations with annealed inverse temperatures.

Five variants share one state shape:

* ``standard``: alternating marginal projections at a fixed beta;
* ``annealed``: beta increases along a schedule, the row update runs at the
  previous beta and the column update at the new one;
* ``debiased``: annealed plus a damping of the previous row scaling that
  cancels the first-order marginal relaxation error;
* ``symmetric`` / ``symmetric_debiased``: simultaneous half-step updates of
  both scalings followed by a total-mass normalization.

Everything is carried as (log a, log b) with stabilized log-sum-exp; kernels
``exp(-beta c)`` are never materialized, so large beta cannot overflow.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LogScalings, Plan, Problem, log_sum_exp_axis
from .regpath import theorem2_bound
from .rounding import round_to_polytope
from .schedules import Schedule

__all__ = [
    "VARIANTS",
    "SolverConfig",
    "SolverState",
    "SolverDivergenceError",
    "RunRecord",
    "init_state",
    "step_standard",
    "step_annealed",
    "step_debiased",
    "step_symmetric",
    "plan_of",
    "run",
]

VARIANTS = ("standard", "annealed", "debiased", "symmetric", "symmetric_debiased")


class SolverDivergenceError(RuntimeError):
    """A scaling became non-finite; carries the failing iteration index."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite scaling at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """What to run: variant, schedule, horizon, and diagnostic stride."""

    variant: str
    schedule: Schedule
    max_iters: int
    record_every: int = 1

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be at least 1, got {self.record_every}")


@dataclass(frozen=True)
class SolverState:
    """Iteration state: log scalings plus the schedule history they need.

    log_a and log_b are the logarithms of the diagonal scalings a_t, b_t, so
    the induced plan is ``exp(log_a_i + log_b_j - beta c_ij)``.  prev_log_a
    feeds the debiased variants; beta is beta_t, prev_beta is beta_{t-1} and
    prev_prev_beta is beta_{(t-2) v 0}.
    """

    t: int
    log_a: np.ndarray
    log_b: np.ndarray
    prev_log_a: np.ndarray
    beta: float
    prev_beta: float
    prev_prev_beta: float

    @property
    def scalings(self) -> LogScalings:
        """Potentials in the reference-plan convention of plan_from_scalings."""
        m = self.log_a.size
        n = self.log_b.size
        return LogScalings(
            u=(self.log_a + np.log(m)) / self.beta,
            v=(self.log_b + np.log(n)) / self.beta,
            beta=self.beta,
        )


def init_state(prob: Problem, sched: Schedule) -> SolverState:
    """State at t = 0: a_0 = b_0 = 1 and beta_0 from the schedule."""
    beta0 = sched.beta_at(0)
    zero_a = np.zeros(prob.m)
    return SolverState(
        t=0,
        log_a=zero_a,
        log_b=np.zeros(prob.n),
        prev_log_a=zero_a,
        beta=beta0,
        prev_beta=beta0,
        prev_prev_beta=beta0,
    )


def _check_finite(state: SolverState) -> SolverState:
    if not (np.all(np.isfinite(state.log_a)) and np.all(np.isfinite(state.log_b))):
        raise SolverDivergenceError(state.t)
    return state


def _asymmetric_step(
    state: SolverState, prob: Problem, beta_new: float, damping: float
) -> SolverState:
    # row update at the old beta, column update at the new one
    log_a = damping * state.log_a + np.log(prob.p) - log_sum_exp_axis(
        state.log_b[None, :] - state.beta * prob.cost, axis=1
    )
    log_b = np.log(prob.q) - log_sum_exp_axis(
        log_a[:, None] - beta_new * prob.cost, axis=0
    )
    return _check_finite(
        SolverState(
            t=state.t + 1,
            log_a=log_a,
            log_b=log_b,
            prev_log_a=state.log_a,
            beta=beta_new,
            prev_beta=state.beta,
            prev_prev_beta=state.prev_beta,
        )
    )


def step_standard(state: SolverState, prob: Problem, sched: Schedule) -> SolverState:
    """One Sinkhorn iteration at the fixed temperature beta_0."""
    del sched  # signature kept uniform; beta stays at its initial value
    return _asymmetric_step(state, prob, state.beta, 0.0)


def step_annealed(state: SolverState, prob: Problem, sched: Schedule) -> SolverState:
    """One annealed iteration: project on p at beta_{t-1}, on q at beta_t."""
    return _asymmetric_step(state, prob, sched.beta_at(state.t + 1), 0.0)


def step_debiased(state: SolverState, prob: Problem, sched: Schedule) -> SolverState:
    """Annealed step with the debiasing damping of the previous scaling.

    The row update keeps a fraction ``1 - beta_{(t-2) v 0} / beta_{t-1}`` of
    log a_{t-1}, which cancels the first-order relaxation bias; at t = 1 and
    under constant schedules the fraction is zero and the step reduces to the
    annealed one.
    """
    damping = 1.0 - state.prev_beta / state.beta
    return _asymmetric_step(state, prob, sched.beta_at(state.t + 1), damping)


def step_symmetric(
    state: SolverState, prob: Problem, sched: Schedule, debias: bool = False
) -> SolverState:
    """Simultaneous half-step update of both scalings, then mass projection.

    Both updates read the previous iteration's scalings at beta_{t-1}; the
    new plan at beta_t is then normalized to total mass 1 by an equal shift
    of both log scalings.
    """
    damping = (1.0 - state.prev_beta / state.beta) if debias else 0.0
    half = 0.5 + damping
    log_a = half * state.log_a + 0.5 * (
        np.log(prob.p)
        - log_sum_exp_axis(state.log_b[None, :] - state.beta * prob.cost, axis=1)
    )
    log_b = half * state.log_b + 0.5 * (
        np.log(prob.q)
        - log_sum_exp_axis(state.log_a[:, None] - state.beta * prob.cost, axis=0)
    )
    beta_new = sched.beta_at(state.t + 1)
    log_mass = log_sum_exp_axis(
        (log_a[:, None] + log_b[None, :] - beta_new * prob.cost).reshape(1, -1), axis=1
    )[0]
    log_a = log_a - log_mass / 2.0
    log_b = log_b - log_mass / 2.0
    return _check_finite(
        SolverState(
            t=state.t + 1,
            log_a=log_a,
            log_b=log_b,
            prev_log_a=state.log_a,
            beta=beta_new,
            prev_beta=state.beta,
            prev_prev_beta=state.prev_beta,
        )
    )


_STEPS = {
    "standard": step_standard,
    "annealed": step_annealed,
    "debiased": step_debiased,
    "symmetric": lambda s, prob, sched: step_symmetric(s, prob, sched, debias=False),
    "symmetric_debiased": lambda s, prob, sched: step_symmetric(s, prob, sched, debias=True),
}


def plan_of(state: SolverState, prob: Problem) -> Plan:
    """Materialize the current plan ``exp(log_a_i + log_b_j - beta_t c_ij)``."""
    with np.errstate(over="ignore"):
        matrix = np.exp(
            state.log_a[:, None] + state.log_b[None, :] - state.beta * prob.cost
        )
    if not np.all(np.isfinite(matrix)):
        raise SolverDivergenceError(state.t)
    return Plan(matrix)


@dataclass(frozen=True)
class RunRecord:
    """Diagnostics of one recorded iteration.

    subopt_rounded is only filled when the exact optimum is supplied;
    bound_thm2 is the annealing suboptimality certificate at (alpha_t,
    beta_t); plan is retained only on request (memory scales with mn).
    """

    t: int
    beta: float
    alpha: float
    cost_inner: float
    l1_p: float
    l1_q: float
    subopt_rounded: float | None = None
    bound_thm2: float | None = None
    plan: Plan | None = None


def run(
    config: SolverConfig,
    prob: Problem,
    ot_value: float | None = None,
    record_times=None,
    keep_plans: bool = False,
) -> tuple[Plan, list[RunRecord]]:
    """Iterate a variant and collect diagnostics.

    Args:
        config: variant, schedule, horizon, record stride.
        prob: the instance.
        ot_value: exact optimum; enables rounded-suboptimality records.
        record_times: explicit iteration set to record, overriding the
            stride (the stride applies when this is None).
        keep_plans: retain the full plan in each record.

    Returns:
        The final plan and the records, in increasing t.

    Raises:
        SolverDivergenceError: a scaling left the finite range; the message
            carries the failing iteration.
    """
    step = _STEPS[config.variant]
    state = init_state(prob, config.schedule)
    wanted = None if record_times is None else set(int(t) for t in record_times)
    records: list[RunRecord] = []
    for t in range(1, config.max_iters + 1):
        state = step(state, prob, config.schedule)
        if wanted is not None:
            recording = t in wanted
        else:
            recording = t % config.record_every == 0 or t == config.max_iters
        if not recording:
            continue
        plan = plan_of(state, prob)
        alpha = state.beta - state.prev_beta
        subopt = None
        if ot_value is not None:
            rounded = round_to_polytope(plan, prob.p, prob.q)
            subopt = float((prob.cost * rounded.plan.matrix).sum()) - ot_value
        records.append(
            RunRecord(
                t=t,
                beta=state.beta,
                alpha=alpha,
                cost_inner=float((prob.cost * plan.matrix).sum()),
                l1_p=float(np.abs(plan.row_marginal - prob.p).sum()),
                l1_q=float(np.abs(plan.col_marginal - prob.q).sum()),
                subopt_rounded=subopt,
                bound_thm2=theorem2_bound(
                    alpha, state.beta, prob.m, prob.n, prob.p, prob.cost
                ),
                plan=plan if keep_plans else None,
            )
        )
    return plan_of(state, prob), records
