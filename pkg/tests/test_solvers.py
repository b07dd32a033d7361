"""Unit tests for the log-domain Sinkhorn variants and the run loop."""
import math

import numpy as np
import pytest

from otanneal import (
    VARIANTS,
    ConstantSchedule,
    PlateauSchedule,
    PolynomialSchedule,
    Problem,
    SolverConfig,
    SolverDivergenceError,
    init_state,
    kl_divergence,
    plan_from_scalings,
    plan_of,
    plateau_update_times,
    run,
)
from otanneal.problems import GeneratorSpec, gen_random
from otanneal.solvers import step_standard

_ASYMMETRIC = ("standard", "annealed", "debiased")


def _closed_form_2x2(beta: float) -> np.ndarray:
    # symmetric 2x2 instance: scalings are constant vectors, so every
    # iterate is the mass-one Gibbs plan at the current beta
    e = math.exp(-beta)
    z = 2.0 * (1.0 + e)
    return np.array([[1.0 / z, e / z], [e / z, 1.0 / z]])


class TestInitState:
    def test_zero_scalings_and_beta0(self, tiny_symmetric):
        state = init_state(tiny_symmetric, PolynomialSchedule(3.0, 0.5))
        assert state.t == 0
        assert np.array_equal(state.log_a, np.zeros(2))
        assert np.array_equal(state.log_b, np.zeros(2))
        assert state.beta == 3.0
        assert state.prev_beta == 3.0

    def test_scalings_property_matches_plan(self, tiny_symmetric):
        sched = PolynomialSchedule(2.0, 0.5)
        state = init_state(tiny_symmetric, sched)
        for _ in range(3):
            state = step_standard(state, tiny_symmetric, sched)
        via_scalings = plan_from_scalings(state.scalings, tiny_symmetric)
        direct = plan_of(state, tiny_symmetric)
        assert np.allclose(via_scalings.matrix, direct.matrix, rtol=1e-12, atol=0.0)


class TestConstantScheduleEquivalence:
    def test_three_variants_coincide(self):
        # with a constant beta the annealed update runs at the same
        # temperature and the debiasing damping vanishes
        prob = gen_random(GeneratorSpec("random", 10, 8, 6))
        sched = ConstantSchedule(7.0)
        plans = {}
        for variant in _ASYMMETRIC:
            plan, _ = run(SolverConfig(variant, sched, max_iters=200), prob)
            plans[variant] = plan.matrix
        assert np.abs(plans["annealed"] - plans["standard"]).max() <= 1e-12
        assert np.abs(plans["debiased"] - plans["standard"]).max() <= 1e-12


class TestSmallInstances:
    def test_single_cell_one_step(self):
        prob = Problem(cost=np.zeros((1, 1)), p=np.ones(1), q=np.ones(1))
        plan, _ = run(SolverConfig("standard", ConstantSchedule(1.0), max_iters=1), prob)
        assert plan.matrix == pytest.approx(np.ones((1, 1)), abs=1e-15)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_symmetric_2x2_closed_form(self, tiny_symmetric, variant):
        sched = PolynomialSchedule(2.0, 0.5)
        _, records = run(
            SolverConfig(variant, sched, max_iters=7), tiny_symmetric, keep_plans=True
        )
        for rec in records:
            expect = _closed_form_2x2(rec.beta)
            assert np.abs(rec.plan.matrix - expect).max() <= 1e-12


class TestIterationInvariants:
    @pytest.mark.parametrize("variant", _ASYMMETRIC)
    def test_column_marginal_exact(self, variant):
        # the column update is the last projection, so q is matched to
        # rounding error at every iteration
        prob = gen_random(GeneratorSpec("random", 9, 7, 2))
        _, records = run(
            SolverConfig(variant, PolynomialSchedule(5.0, 0.5), max_iters=40), prob
        )
        assert all(rec.l1_q <= 1e-10 for rec in records)

    @pytest.mark.parametrize("variant", ["symmetric", "symmetric_debiased"])
    def test_symmetric_mass_one(self, variant):
        prob = gen_random(GeneratorSpec("random", 6, 9, 8))
        _, records = run(
            SolverConfig(variant, PolynomialSchedule(4.0, 0.5), max_iters=30),
            prob,
            keep_plans=True,
        )
        for rec in records:
            assert rec.plan.mass == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("variant", ["symmetric", "symmetric_debiased"])
    def test_symmetric_instance_keeps_scalings_equal(self, tiny_symmetric, variant):
        sched = PolynomialSchedule(2.0, 0.5)
        state = init_state(tiny_symmetric, sched)
        from otanneal.solvers import step_symmetric

        for _ in range(10):
            state = step_symmetric(
                state, tiny_symmetric, sched, debias=variant.endswith("debiased")
            )
            assert np.allclose(state.log_a, state.log_b, atol=1e-12)

    @pytest.mark.parametrize("variant", ["annealed", "debiased"])
    def test_cost_shift_invariance(self, variant):
        base = gen_random(GeneratorSpec("random", 7, 5, 9))
        shifted = Problem(cost=base.cost + 5.0, p=base.p, q=base.q)
        sched = PolynomialSchedule(3.0, 0.5)
        plan_a, _ = run(SolverConfig(variant, sched, max_iters=50), base)
        plan_b, _ = run(SolverConfig(variant, sched, max_iters=50), shifted)
        assert np.abs(plan_a.matrix - plan_b.matrix).max() <= 1e-10

    def test_debiased_first_step_equals_annealed(self):
        # the damping factor 1 - beta_{-1 v 0} / beta_0 is exactly zero
        prob = gen_random(GeneratorSpec("random", 5, 6, 3))
        sched = PolynomialSchedule(2.0, 0.5)
        ann, _ = run(SolverConfig("annealed", sched, max_iters=1), prob)
        deb, _ = run(SolverConfig("debiased", sched, max_iters=1), prob)
        assert np.array_equal(ann.matrix, deb.matrix)


class TestDivergence:
    def test_huge_beta_raises_with_iteration(self):
        prob = gen_random(GeneratorSpec("random", 6, 6, 0))
        config = SolverConfig("annealed", PolynomialSchedule(1e308, 0.5), max_iters=10)
        with pytest.raises(SolverDivergenceError) as info:
            run(config, prob)
        assert info.value.iteration == 3
        assert "iteration 3" in str(info.value)


class TestConfigValidation:
    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="variant"):
            SolverConfig("fast", ConstantSchedule(1.0), max_iters=10)

    def test_bad_horizon(self):
        with pytest.raises(ValueError, match="max_iters"):
            SolverConfig("standard", ConstantSchedule(1.0), max_iters=0)

    def test_bad_stride(self):
        with pytest.raises(ValueError, match="record_every"):
            SolverConfig("standard", ConstantSchedule(1.0), max_iters=10, record_every=0)


class TestRunRecording:
    def test_stride_includes_final_iteration(self, tiny_symmetric):
        config = SolverConfig(
            "annealed", PolynomialSchedule(2.0, 0.5), max_iters=10, record_every=4
        )
        _, records = run(config, tiny_symmetric)
        assert [rec.t for rec in records] == [4, 8, 10]

    def test_explicit_times_override_stride(self, tiny_symmetric):
        config = SolverConfig(
            "annealed", PolynomialSchedule(2.0, 0.5), max_iters=10, record_every=4
        )
        _, records = run(config, tiny_symmetric, record_times={3, 7})
        assert [rec.t for rec in records] == [3, 7]

    def test_plans_kept_only_on_request(self, tiny_symmetric):
        config = SolverConfig("annealed", PolynomialSchedule(2.0, 0.5), max_iters=3)
        _, bare = run(config, tiny_symmetric)
        _, kept = run(config, tiny_symmetric, keep_plans=True)
        assert all(rec.plan is None for rec in bare)
        assert all(rec.plan is not None for rec in kept)

    def test_record_fields(self, tiny_symmetric, tiny_exact):
        sched = PolynomialSchedule(2.0, 0.5)
        config = SolverConfig("annealed", sched, max_iters=5)
        _, records = run(config, tiny_symmetric, ot_value=tiny_exact.value)
        for rec in records:
            assert rec.beta == pytest.approx(sched.beta_at(rec.t), rel=1e-15)
            assert rec.alpha == pytest.approx(sched.alpha_at(rec.t), rel=1e-12)
            assert rec.bound_thm2 is not None and rec.bound_thm2 > 0.0
            assert rec.subopt_rounded is not None
            # rounding onto the polytope can only add transport cost above
            # the exact optimum, up to arithmetic noise
            assert rec.subopt_rounded >= -1e-9

    def test_suboptimality_absent_without_reference(self, tiny_symmetric):
        config = SolverConfig("annealed", PolynomialSchedule(2.0, 0.5), max_iters=3)
        _, records = run(config, tiny_symmetric)
        assert all(rec.subopt_rounded is None for rec in records)


class TestMirrorDescentBound:
    @pytest.mark.parametrize(
        "maker,beta0",
        [
            (lambda: None, 2.0),
            (lambda: gen_random(GeneratorSpec("random", 6, 6, 4)), 15.0),
        ],
        ids=["tiny-2x2", "random-6x6"],
    )
    def test_row_marginal_kl_decays_like_1_over_t(self, tiny_symmetric, maker, beta0):
        # fixed-temperature Sinkhorn is mirror descent on the row-marginal
        # KL, so kl(pi_t 1, p) <= kl(pi_star, pi_0) / t with pi_0 the Gibbs
        # kernel of the min-shifted cost
        prob = maker() or tiny_symmetric
        sched = ConstantSchedule(beta0)
        star, _ = run(SolverConfig("standard", sched, max_iters=20000), prob)
        pi0 = np.exp(-beta0 * (prob.cost - prob.cost.min()))
        kl_ref = kl_divergence(star.matrix, pi0)
        _, records = run(
            SolverConfig("standard", sched, max_iters=100), prob, keep_plans=True
        )
        for rec in records:
            lhs = kl_divergence(rec.plan.row_marginal, prob.p)
            assert lhs <= kl_ref / rec.t + 1e-8


@pytest.fixture(scope="module")
def geometric_runs(geometric_default, geometric_exact):
    """Suboptimality of each variant on the default geometric benchmark."""
    ot = geometric_exact.value

    def subopts(variant, kappa, max_iters, times):
        sched = PolynomialSchedule(10.0, kappa)
        _, recs = run(
            SolverConfig(variant, sched, max_iters=max_iters),
            geometric_default,
            ot_value=ot,
            record_times=times,
        )
        return {rec.t: rec.subopt_rounded for rec in recs}

    updates = plateau_update_times(2000)
    plateau_times = sorted({t for u in updates[1:] for t in (u - 1, u)} | {2000})
    _, plateau_recs = run(
        SolverConfig("annealed", PlateauSchedule(PolynomialSchedule(10.0, 0.5)), 2000),
        geometric_default,
        ot_value=ot,
        record_times=plateau_times,
    )
    return {
        "annealed": subopts("annealed", 0.5, 500, {200, 500}),
        "debiased": subopts("debiased", 2.0 / 3.0, 2000, {200, 2000}),
        "symmetric": subopts("symmetric", 0.5, 2000, {500, 2000}),
        "symmetric_debiased": subopts("symmetric_debiased", 0.5, 2000, {2000}),
        "plateau": {rec.t: rec.subopt_rounded for rec in plateau_recs},
        "updates": updates,
    }


class TestVariantComparisons:
    """Orderings between variants on the geometric benchmark."""

    def test_debiasing_helps_at_its_step_exponent(self, geometric_runs):
        # debiased annealing at exponent 2/3 beats plain annealing at its
        # own optimal exponent 1/2 already by iteration 200
        assert geometric_runs["debiased"][200] < geometric_runs["annealed"][200]

    def test_symmetric_updates_converge_slower(self, geometric_runs):
        assert geometric_runs["symmetric"][500] > geometric_runs["annealed"][500]

    def test_debiasing_helps_symmetric_updates(self, geometric_runs):
        sym = geometric_runs["symmetric"][2000]
        deb = geometric_runs["symmetric_debiased"][2000]
        assert deb < sym

    def test_plateau_improves_within_each_plateau(self, geometric_runs):
        # while beta is frozen the iterates converge toward that beta's
        # optimum, so suboptimality at the end of a plateau is below its
        # start; each update then kicks it back up
        plateau = geometric_runs["plateau"]
        updates = geometric_runs["updates"]
        for k in range(1, len(updates)):
            start = updates[k]
            end = updates[k + 1] - 1 if k + 1 < len(updates) else 2000
            assert plateau[end] < plateau[start]

    def test_plateau_envelope_above_debiased(self, geometric_runs):
        assert min(geometric_runs["plateau"].values()) >= geometric_runs["debiased"][2000]
