"""Entropic optimal transport with annealed inverse temperatures.

Library layout:

* :mod:`otanneal.core` - problem/plan containers, log-sum-exp, divergences;
* :mod:`otanneal.schedules` - annealing schedules and their parser;
* :mod:`otanneal.solvers` - log-domain scaling iterations (five variants);
* :mod:`otanneal.rounding` - projection onto the transport polytope and the
  entropic suboptimality certificate;
* :mod:`otanneal.regpath` - relaxed-problem solver tracing regularization
  paths, with the error bounds attached to them;
* :mod:`otanneal.reference` - exact LP oracle and diagnostic evaluators;
* :mod:`otanneal.problems` - seeded benchmark generators and file I/O;
* :mod:`otanneal.cli` - experiment harness writing CSV/SVG artifacts.
"""

from .core import (
    LogScalings,
    Plan,
    Problem,
    kl_divergence,
    log_sum_exp,
    log_sum_exp_axis,
    osc_norm,
    plan_from_scalings,
    uniform_reference,
)
from .problems import DEFAULT_SEEDS, GeneratorSpec, generate, load_problem, save_problem
from .reference import (
    ExactSolution,
    OmdReport,
    dual_uniqueness_probe,
    exact_ot,
    omd_check,
    potential_seminorm,
    schrodinger_residual,
)
from .regpath import (
    RegPathPoint,
    debiased_marginal,
    lemma4_bound,
    online_gap_bound,
    path,
    solve_point,
    solve_point_symmetric,
    theorem2_bound,
)
from .rounding import RoundingResult, lemma3_certificate, round_to_polytope
from .schedules import (
    ClampedGeometricSchedule,
    ConstantSchedule,
    LinearSchedule,
    PlateauSchedule,
    PolynomialSchedule,
    Schedule,
    parse_schedule,
    plateau_update_times,
    validate_concave,
)
from .solvers import (
    VARIANTS,
    RunRecord,
    SolverConfig,
    SolverDivergenceError,
    SolverState,
    init_state,
    plan_of,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "ClampedGeometricSchedule",
    "ConstantSchedule",
    "DEFAULT_SEEDS",
    "ExactSolution",
    "GeneratorSpec",
    "LinearSchedule",
    "LogScalings",
    "OmdReport",
    "Plan",
    "PlateauSchedule",
    "PolynomialSchedule",
    "Problem",
    "RegPathPoint",
    "RoundingResult",
    "RunRecord",
    "Schedule",
    "SolverConfig",
    "SolverDivergenceError",
    "SolverState",
    "VARIANTS",
    "debiased_marginal",
    "dual_uniqueness_probe",
    "exact_ot",
    "generate",
    "init_state",
    "kl_divergence",
    "lemma3_certificate",
    "lemma4_bound",
    "load_problem",
    "log_sum_exp",
    "log_sum_exp_axis",
    "omd_check",
    "online_gap_bound",
    "osc_norm",
    "parse_schedule",
    "path",
    "plan_from_scalings",
    "plan_of",
    "plateau_update_times",
    "potential_seminorm",
    "round_to_polytope",
    "run",
    "save_problem",
    "schrodinger_residual",
    "solve_point",
    "solve_point_symmetric",
    "theorem2_bound",
    "uniform_reference",
    "validate_concave",
]
