"""Unit tests for the exact oracle and the diagnostic evaluators."""
import math

import numpy as np
import pytest

from otanneal import (
    ClampedGeometricSchedule,
    ConstantSchedule,
    LogScalings,
    Plan,
    PolynomialSchedule,
    Problem,
    SolverConfig,
    dual_uniqueness_probe,
    exact_ot,
    omd_check,
    potential_seminorm,
    run,
    schrodinger_residual,
)
from otanneal.problems import GeneratorSpec, gen_random, generate
from otanneal.solvers import init_state, step_standard


class TestExactOt:
    def test_symmetric_2x2(self, tiny_symmetric, tiny_exact):
        assert tiny_exact.value == pytest.approx(0.0, abs=1e-15)
        assert np.allclose(tiny_exact.plan.matrix, np.diag([0.5, 0.5]), atol=1e-15)

    def test_single_source(self):
        rng = np.random.default_rng(2)
        q = rng.uniform(0.1, 1.0, 6)
        q /= q.sum()
        cost = rng.uniform(0.0, 3.0, (1, 6))
        prob = Problem(cost=cost, p=np.ones(1), q=q)
        sol = exact_ot(prob)
        assert sol.value == pytest.approx(float(cost[0] @ q), rel=1e-12)
        assert np.allclose(sol.plan.matrix[0], q, atol=1e-12)

    def test_primal_dual_certificates(self):
        rng = np.random.default_rng(13)
        for seed in range(5):
            prob = gen_random(GeneratorSpec("random", 6, 7, seed))
            sol = exact_ot(prob)
            u, v = sol.potentials
            pi = sol.plan.matrix
            # primal feasibility
            assert np.abs(pi.sum(axis=1) - prob.p).max() <= 1e-9
            assert np.abs(pi.sum(axis=0) - prob.q).max() <= 1e-9
            assert pi.min() >= 0.0
            assert sol.value == pytest.approx(float((prob.cost * pi).sum()), abs=1e-9)
            # dual feasibility and zero duality gap
            gap = u[:, None] + v[None, :] - prob.cost
            assert gap.max() <= 1e-9
            dual_value = float(prob.p @ u + prob.q @ v)
            assert dual_value == pytest.approx(sol.value, abs=1e-9)
            # complementary slackness on the support
            support = pi > 1e-12
            assert np.abs(gap[support]).max() <= 1e-9

    def test_size_guard(self):
        m, n = 1001, 1000
        prob = Problem(
            cost=np.zeros((m, n)),
            p=np.full(m, 1.0 / m),
            q=np.full(n, 1.0 / n),
        )
        with pytest.raises(ValueError, match="too large"):
            exact_ot(prob)


class TestPotentialSeminorm:
    def test_identical_pairs(self):
        u = np.array([1.0, -2.0, 0.5])
        v = np.array([0.0, 3.0])
        assert potential_seminorm(u, v, u, v) == 0.0

    def test_conserved_shift_is_free(self):
        rng = np.random.default_rng(4)
        u = rng.normal(size=5)
        v = rng.normal(size=7)
        for lam in (-3.0, 0.25, 10.0):
            assert potential_seminorm(u + lam, v - lam, u, v) == pytest.approx(
                0.0, abs=1e-12
            )

    def test_matches_dense_scan(self):
        # g(lam) = max|d - lam| + max|e + lam| reduces to maxima of four
        # affine functions, so a dense lam scan bounds the true minimum
        rng = np.random.default_rng(8)
        for _ in range(10):
            d = rng.normal(size=5)
            e = rng.normal(size=5)
            got = potential_seminorm(d, e, np.zeros(5), np.zeros(5))
            lam = np.linspace(-4.0, 4.0, 10**7)
            scan = np.minimum(
                np.maximum(d.max() - lam, lam - d.min())
                + np.maximum(e.max() + lam, -lam - e.min()),
                np.inf,
            ).min()
            assert abs(got - float(scan)) <= 1e-6
            assert got <= float(scan) + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="lengths"):
            potential_seminorm(np.zeros(3), np.zeros(2), np.zeros(2), np.zeros(2))


class TestSchrodingerResidual:
    def test_converged_run_has_tiny_residual(self):
        prob = gen_random(GeneratorSpec("random", 8, 6, 4))
        sched = ConstantSchedule(10.0)
        state = init_state(prob, sched)
        for _ in range(400):
            state = step_standard(state, prob, sched)
        assert schrodinger_residual(state.scalings, prob) <= 1e-10

    def test_zero_potentials_violate_the_system(self):
        prob = gen_random(GeneratorSpec("random", 5, 5, 6))
        s = LogScalings(u=np.zeros(5), v=np.zeros(5), beta=3.0)
        assert schrodinger_residual(s, prob) > 1e-3

    def test_monotone_decrease_along_sinkhorn(self):
        geo = generate(GeneratorSpec("geometric", 30, 24, 5))
        sched = ConstantSchedule(10.0)
        state = init_state(geo, sched)
        residuals = []
        for _ in range(60):
            state = step_standard(state, geo, sched)
            residuals.append(schrodinger_residual(state.scalings, geo))
        for before, after in zip(residuals, residuals[1:]):
            assert after <= before * (1.0 + 1e-9) + 1e-15

    def test_beta_override(self):
        prob = gen_random(GeneratorSpec("random", 6, 6, 7))
        sched = ConstantSchedule(8.0)
        state = init_state(prob, sched)
        for _ in range(300):
            state = step_standard(state, prob, sched)
        at_true = schrodinger_residual(state.scalings, prob, beta=8.0)
        at_wrong = schrodinger_residual(state.scalings, prob, beta=2.0)
        assert at_true <= 1e-10
        assert at_wrong > 1e-3

    def test_validation(self, tiny_symmetric):
        bad_size = LogScalings(u=np.zeros(3), v=np.zeros(2), beta=1.0)
        with pytest.raises(ValueError, match="do not match"):
            schrodinger_residual(bad_size, tiny_symmetric)
        good = LogScalings(u=np.zeros(2), v=np.zeros(2), beta=1.0)
        with pytest.raises(ValueError, match="beta"):
            schrodinger_residual(good, tiny_symmetric, beta=-1.0)


class TestDualUniquenessProbe:
    def test_stable_instances(self):
        geo = generate(GeneratorSpec("geometric", 20, 16, 3))
        rnd = gen_random(GeneratorSpec("random", 12, 12, 1))
        assert dual_uniqueness_probe(geo)
        assert dual_uniqueness_probe(rnd)

    def test_accepts_precomputed_solution(self):
        rnd = gen_random(GeneratorSpec("random", 10, 9, 2))
        sol = exact_ot(rnd)
        assert dual_uniqueness_probe(rnd, sol) == dual_uniqueness_probe(rnd)


class TestPotentialStability:
    def test_long_fixed_temperature_run_approaches_exact_duals(
        self, geometric_default, geometric_exact
    ):
        # at beta = 1000 the entropic potentials sit within 0.05 of the
        # linear-programming duals in the shift-invariant seminorm; only
        # meaningful when the exact dual is unique, so probe first
        if not dual_uniqueness_probe(geometric_default, geometric_exact):
            pytest.skip("exact dual is degenerate; seminorm target undefined")
        sched = ConstantSchedule(1000.0)
        state = init_state(geometric_default, sched)
        for _ in range(3000):
            state = step_standard(state, geometric_default, sched)
        s = state.scalings
        u_star, v_star = geometric_exact.potentials
        assert potential_seminorm(s.u, s.v, u_star, v_star) < 0.05


class TestOmdCheck:
    def test_constant_schedule_passes(self, tiny_symmetric, tiny_exact):
        sched = ConstantSchedule(2.0)
        _, recs = run(
            SolverConfig("annealed", sched, max_iters=50), tiny_symmetric,
            keep_plans=True,
        )
        report = omd_check(recs, tiny_symmetric, sched, tiny_exact.plan)
        assert report.concave and report.passed
        assert report.t_max == 50
        assert report.monotone_slack >= -1e-10
        assert report.regret_slack >= -1e-8
        assert report.pointwise_slack >= -1e-8

    def test_polynomial_schedule_passes(self, tiny_symmetric, tiny_exact):
        sched = PolynomialSchedule(2.0, 0.5)
        _, recs = run(
            SolverConfig("annealed", sched, max_iters=200), tiny_symmetric,
            keep_plans=True,
        )
        report = omd_check(recs, tiny_symmetric, sched, tiny_exact.plan)
        assert report.concave and report.passed

    def test_convex_schedule_skips_checks(self, tiny_symmetric, tiny_exact):
        sched = ClampedGeometricSchedule(1.1, 5.0)
        _, recs = run(
            SolverConfig("annealed", sched, max_iters=30), tiny_symmetric,
            keep_plans=True,
        )
        report = omd_check(recs, tiny_symmetric, sched, tiny_exact.plan)
        assert not report.concave
        assert math.isnan(report.monotone_slack)
        assert math.isnan(report.regret_slack)
        assert math.isnan(report.pointwise_slack)
        assert report.passed

    def test_empty_run(self, tiny_symmetric, tiny_exact):
        with pytest.raises(ValueError, match="empty"):
            omd_check([], tiny_symmetric, ConstantSchedule(2.0), tiny_exact.plan)

    def test_missing_plans(self, tiny_symmetric, tiny_exact):
        sched = ConstantSchedule(2.0)
        _, recs = run(SolverConfig("annealed", sched, max_iters=5), tiny_symmetric)
        with pytest.raises(ValueError, match="keep_plans"):
            omd_check(recs, tiny_symmetric, sched, tiny_exact.plan)

    def test_non_consecutive_records(self, tiny_symmetric, tiny_exact):
        sched = ConstantSchedule(2.0)
        _, recs = run(
            SolverConfig("annealed", sched, max_iters=10, record_every=2),
            tiny_symmetric, keep_plans=True,
        )
        with pytest.raises(ValueError, match="consecutively"):
            omd_check(recs, tiny_symmetric, sched, tiny_exact.plan)

    def test_schedule_mismatch(self, tiny_symmetric, tiny_exact):
        _, recs = run(
            SolverConfig("annealed", PolynomialSchedule(2.0, 0.5), max_iters=5),
            tiny_symmetric, keep_plans=True,
        )
        with pytest.raises(ValueError, match="schedule"):
            omd_check(recs, tiny_symmetric, PolynomialSchedule(3.0, 0.5), tiny_exact.plan)

    def test_reference_marginal_checked(self, tiny_symmetric):
        sched = ConstantSchedule(2.0)
        _, recs = run(
            SolverConfig("annealed", sched, max_iters=5), tiny_symmetric,
            keep_plans=True,
        )
        ref = Plan(np.array([[0.5, 0.0], [0.5, 0.0]]))
        with pytest.raises(ValueError, match="column marginal"):
            omd_check(recs, tiny_symmetric, sched, ref)
