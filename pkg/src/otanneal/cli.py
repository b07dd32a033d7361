"""Experiment harness emitting CSV curves and SVG plots.

Five subcommands reproduce the benchmark figures: ``pareto`` (constant-beta
baselines vs annealed runs), ``sweep`` (final suboptimality vs annealing
exponent), ``paths`` (optimization vs regularization path), ``plateau``
(piecewise-constant vs smooth schedules) and ``symmetric`` (simultaneous
update variants).  Every command writes CSV files sharing one fixed schema,
one SVG plot, a ``manifest`` text file listing all parameters plus the
exact transport value, and a per-directory cache of exact values.  Outputs
are deterministic given the flags; reruns produce byte-identical CSV.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .core import Problem, osc_norm
from .problems import DEFAULT_SEEDS, GeneratorSpec, generate, load_problem
from .reference import exact_ot
from .regpath import path as regpath_path
from .regpath import theorem2_bound
from .rounding import round_to_polytope
from .schedules import parse_schedule, plateau_update_times
from .solvers import RunRecord, SolverConfig, SolverDivergenceError, run

__all__ = ["main"]

plt.rcParams["svg.hashsalt"] = "otanneal"

CSV_HEADER = "t,beta,alpha,cost_inner,l1_p,l1_q,subopt_rounded,bound_thm2"
# Constant-beta baseline grid for the pareto command, in units of 1/osc(c).
BASELINE_BETAS = (10.0, 10.0**1.5, 100.0, 10.0**2.5, 1000.0)
_DEFAULT_PROBLEM = "gen:geometric,300,300"


def _fmt(x: float | None) -> str:
    return "" if x is None else format(float(x), ".17g")


def record_grid(max_t: int, stride: int | None = None) -> list[int]:
    """Iteration indices to record: geometric spacing or a fixed stride.

    The geometric grid rounds 10^(k/8); the final iteration is always
    included so every curve has a point at max_t.
    """
    if max_t < 1:
        raise ValueError(f"max_t must be at least 1, got {max_t}")
    if stride is not None:
        if stride < 1:
            raise ValueError(f"record stride must be at least 1, got {stride}")
        times = set(range(stride, max_t + 1, stride))
    else:
        times = set()
        k = 0
        while True:
            t = round(10.0 ** (k / 8.0))
            if t > max_t:
                break
            times.add(t)
            k += 1
    times.add(max_t)
    return sorted(times)


def write_records(path: Path, records: list[RunRecord]) -> None:
    """Write records as CSV in the fixed schema, 17 significant digits."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.t),
                    _fmt(r.beta),
                    _fmt(r.alpha),
                    _fmt(r.cost_inner),
                    _fmt(r.l1_p),
                    _fmt(r.l1_q),
                    _fmt(r.subopt_rounded),
                    _fmt(r.bound_thm2),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def resolve_problem(spec_text: str, seed_flag: int | None) -> tuple[Problem, str]:
    """Load a problem file or generate an instance from gen:family,m,n[,seed].

    A seed inside the gen string wins over --seed, which wins over the
    family's default seed.  Returns the problem and its resolved label.
    """
    if not spec_text.startswith("gen:"):
        return load_problem(spec_text), spec_text
    parts = spec_text[4:].split(",")
    if len(parts) not in (3, 4):
        raise ValueError(
            f"bad generator spec {spec_text!r}: expected gen:family,m,n[,seed]"
        )
    family = parts[0].strip()
    try:
        m, n = int(parts[1]), int(parts[2])
        seed = int(parts[3]) if len(parts) == 4 else None
    except ValueError:
        raise ValueError(f"bad generator spec {spec_text!r}: sizes and seed must be integers")
    if seed is None:
        seed = seed_flag if seed_flag is not None else DEFAULT_SEEDS.get(family)
    if seed is None:
        raise ValueError(f"family {family!r} has no default seed; pass --seed")
    prob = generate(GeneratorSpec(family=family, m=m, n=n, seed=seed))
    return prob, f"gen:{family},{m},{n},{seed}"


def _fingerprint(prob: Problem) -> str:
    h = hashlib.sha256()
    h.update(np.array([prob.m, prob.n], dtype=np.int64).tobytes())
    h.update(prob.p.tobytes())
    h.update(prob.q.tobytes())
    h.update(prob.cost.tobytes())
    return h.hexdigest()


def exact_value(prob: Problem, out_dir: Path) -> float:
    """Exact transport value, cached per problem in the output directory."""
    cache = out_dir / "exact_cache.txt"
    key = _fingerprint(prob)
    if cache.exists():
        for line in cache.read_text(encoding="utf-8").splitlines():
            stored_key, _, stored = line.partition(" ")
            if stored_key == key:
                return float(stored)
    value = exact_ot(prob).value
    with cache.open("a", encoding="utf-8") as fh:
        fh.write(f"{key} {_fmt(value)}\n")
    return value


def write_manifest(out_dir: Path, entries: dict) -> None:
    lines = [f"{key}={entries[key]}" for key in sorted(entries)]
    (out_dir / "manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _positive_part(values) -> np.ndarray:
    # log plots cannot take the oracle's 1e-9-scale negative jitter
    return np.maximum(np.asarray(values, dtype=np.float64), 1e-16)


def _curve_points(records: list[RunRecord], field: str) -> tuple[list[int], np.ndarray]:
    ts = [r.t for r in records]
    vals = [getattr(r, field) for r in records]
    return ts, _positive_part(vals)


def _save_loglog(out_path: Path, curves, ylabel: str, marks=()) -> None:
    """curves: iterable of (label, ts, values, style dict)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for label, ts, vals, style in curves:
        ax.loglog(ts, vals, label=label, **style)
    for t in marks:
        ax.axvline(t, color="0.85", linewidth=0.6, zorder=0)
    ax.set_xlabel("iteration t")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)


def _run_curve(
    variant: str,
    schedule_text: str,
    prob: Problem,
    max_t: int,
    times: list[int],
    ot: float,
) -> list[RunRecord]:
    sched = parse_schedule(schedule_text)
    config = SolverConfig(variant=variant, schedule=sched, max_iters=max_t)
    _, records = run(config, prob, ot_value=ot, record_times=times)
    return records


def _parse_kappa_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"bad kappa grid {text!r}: expected start:stop:step")
    start, stop, step = (float(s) for s in parts)
    if step <= 0.0 or stop < start:
        raise ValueError(f"bad kappa grid {text!r}: need step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def cmd_pareto(args, prob: Problem, prob_label: str, out_dir: Path) -> None:
    """Constant-beta baselines plus annealed curves, one CSV per run."""
    max_t = args.max_t if args.max_t is not None else 2000
    times = record_grid(max_t, args.record_stride)
    ot = exact_value(prob, out_dir)
    beta0 = 10.0 / osc_norm(prob.cost)
    runs: list[tuple[str, str, str]] = []
    for i, scale in enumerate(BASELINE_BETAS):
        runs.append((f"baseline{i + 1}", "standard", f"const:{_fmt(scale / 10.0 * beta0)}"))
    if args.schedule:
        for i, text in enumerate(args.schedule):
            runs.append((f"schedule{i + 1}", "annealed", text))
    else:
        runs.append(("annealed", "annealed", f"poly:{_fmt(beta0)},0.5"))
        runs.append(("debiased", "debiased", f"poly:{_fmt(beta0)},{_fmt(2.0 / 3.0)}"))
    manifest = {
        "command": "pareto",
        "problem": prob_label,
        "exact_ot": _fmt(ot),
        "max_t": max_t,
        "record_stride": args.record_stride if args.record_stride else "geometric",
    }
    curves = []
    for label, variant, schedule_text in runs:
        records = _run_curve(variant, schedule_text, prob, max_t, times, ot)
        write_records(out_dir / f"{label}.csv", records)
        manifest[f"curve.{label}"] = f"{variant};{schedule_text};{label}.csv"
        style = {"linestyle": "--", "color": "0.6"} if label.startswith("baseline") else {}
        curves.append((label, *_curve_points(records, "subopt_rounded"), style))
    _save_loglog(out_dir / "pareto.svg", curves, "rounded suboptimality")
    write_manifest(out_dir, manifest)


def cmd_sweep(args, prob: Problem, prob_label: str, out_dir: Path) -> None:
    """Final rounded suboptimality against the annealing exponent."""
    t_eval = args.t_eval
    kappas = _parse_kappa_grid(args.kappa_grid)
    ot = exact_value(prob, out_dir)
    beta0 = 10.0 / osc_norm(prob.cost)
    rows: list[RunRecord] = []
    for kappa in kappas:
        records = _run_curve(
            args.variant, f"poly:{_fmt(beta0)},{_fmt(kappa)}", prob, t_eval, [t_eval], ot
        )
        rows.append(records[-1])
    write_records(out_dir / "sweep.csv", rows)
    subopts = _positive_part([r.subopt_rounded for r in rows])
    best = int(np.argmin(subopts))
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.semilogy(kappas, subopts, marker="o", label=args.variant)
    ax.semilogy([kappas[best]], [subopts[best]], marker="*", markersize=14, linestyle="none",
                label=f"argmin {_fmt(kappas[best])}")
    ax.set_xlabel("annealing exponent")
    ax.set_ylabel(f"rounded suboptimality at t={t_eval}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_dir / "sweep.svg", format="svg")
    plt.close(fig)
    write_manifest(
        out_dir,
        {
            "command": "sweep",
            "problem": prob_label,
            "exact_ot": _fmt(ot),
            "variant": args.variant,
            "t_eval": t_eval,
            "kappa_grid": args.kappa_grid,
            "kappas": ",".join(_fmt(k) for k in kappas),
            "argmin_kappa": _fmt(kappas[best]),
            "rows": "sweep.csv; one row per kappa, in grid order, taken at t=t_eval",
        },
    )


def _regpath_records(points, ts, prob: Problem, ot: float) -> list[RunRecord]:
    records = []
    for t, point in zip(ts, points):
        plan = point.plan
        rounded = round_to_polytope(plan, prob.p, prob.q)
        records.append(
            RunRecord(
                t=t,
                beta=point.beta,
                alpha=point.alpha,
                cost_inner=float((prob.cost * plan.matrix).sum()),
                l1_p=float(np.abs(plan.row_marginal - prob.p).sum()),
                l1_q=float(np.abs(plan.col_marginal - prob.q).sum()),
                subopt_rounded=float((prob.cost * rounded.plan.matrix).sum()) - ot,
                bound_thm2=theorem2_bound(
                    point.alpha, point.beta, prob.m, prob.n, prob.p, prob.cost
                ),
            )
        )
    return records


def cmd_paths(args, prob: Problem, prob_label: str, out_dir: Path) -> None:
    """Optimization path vs regularization path at one schedule."""
    max_t = args.max_t if args.max_t is not None else 3000
    times = record_grid(max_t, args.record_stride)
    ot = exact_value(prob, out_dir)
    beta0 = 10.0 / osc_norm(prob.cost)
    schedule_text = f"poly:{_fmt(beta0)},{_fmt(args.kappa)}"
    sched = parse_schedule(schedule_text)
    config = SolverConfig(variant="annealed", schedule=sched, max_iters=max_t)
    _, opt_records = run(config, prob, ot_value=ot, record_times=times, keep_plans=True)
    write_records(out_dir / "annealed.csv", opt_records)
    points = regpath_path(prob, sched, times, high_accuracy=args.high_accuracy)
    write_records(out_dir / "regpath.csv", _regpath_records(points, times, prob, ot))
    tracking: list[RunRecord] = []
    for rec, point in zip(opt_records, points):
        distance = float(
            np.abs(rec.plan.matrix.sum(axis=1) - point.plan.row_marginal).sum()
        )
        tracking.append(
            RunRecord(
                t=rec.t, beta=rec.beta, alpha=rec.alpha,
                cost_inner=None, l1_p=distance, l1_q=None,
            )
        )
    write_records(out_dir / "tracking.csv", tracking)
    curves = [
        ("optimization path", [r.t for r in opt_records],
         _positive_part([r.l1_p for r in opt_records]), {}),
        ("regularization path", times,
         _positive_part([np.abs(p.plan.row_marginal - prob.p).sum() for p in points]), {}),
        ("path-vs-path distance", [r.t for r in tracking],
         _positive_part([r.l1_p for r in tracking]), {"linestyle": ":"}),
    ]
    _save_loglog(out_dir / "paths.svg", curves, "first-marginal l1 error")
    write_manifest(
        out_dir,
        {
            "command": "paths",
            "problem": prob_label,
            "exact_ot": _fmt(ot),
            "max_t": max_t,
            "kappa": _fmt(args.kappa),
            "schedule": schedule_text,
            "high_accuracy": args.high_accuracy,
            "record_stride": args.record_stride if args.record_stride else "geometric",
            "files": "annealed.csv,regpath.csv,tracking.csv",
            "tracking.l1_p": "l1 distance between the two paths' first marginals"
            " (cost_inner/l1_q/subopt empty by design)",
        },
    )


def cmd_plateau(args, prob: Problem, prob_label: str, out_dir: Path) -> None:
    """Smooth schedule vs its piecewise-constant plateau wrapping."""
    max_t = args.max_t if args.max_t is not None else 2000
    updates = [t for t in plateau_update_times(max_t) if t >= 1]
    # each update ends the previous plateau at t - 1; max_t is always recorded
    extra = set(updates) | {t - 1 for t in updates if t - 1 >= 1}
    times = sorted(set(record_grid(max_t, args.record_stride)) | extra)
    ot = exact_value(prob, out_dir)
    beta0 = 10.0 / osc_norm(prob.cost)
    base = f"poly:{_fmt(beta0)},{_fmt(args.kappa)}"
    curves = []
    manifest = {
        "command": "plateau",
        "problem": prob_label,
        "exact_ot": _fmt(ot),
        "max_t": max_t,
        "kappa": _fmt(args.kappa),
        "update_times": ",".join(str(t) for t in updates),
        "record_stride": args.record_stride if args.record_stride else "geometric",
    }
    for label, schedule_text in (("smooth", base), ("plateau", f"plateau({base})")):
        records = _run_curve("annealed", schedule_text, prob, max_t, times, ot)
        write_records(out_dir / f"{label}.csv", records)
        manifest[f"curve.{label}"] = f"annealed;{schedule_text};{label}.csv"
        curves.append((label, *_curve_points(records, "subopt_rounded"), {}))
    _save_loglog(out_dir / "plateau.svg", curves, "rounded suboptimality",
                 marks=[t for t in updates if t >= 1])
    write_manifest(out_dir, manifest)


def cmd_symmetric(args, prob: Problem, prob_label: str, out_dir: Path) -> None:
    """Asymmetric vs simultaneous-update variants at one schedule."""
    max_t = args.max_t if args.max_t is not None else 2000
    times = record_grid(max_t, args.record_stride)
    ot = exact_value(prob, out_dir)
    beta0 = 10.0 / osc_norm(prob.cost)
    schedule_text = f"poly:{_fmt(beta0)},{_fmt(args.kappa)}"
    manifest = {
        "command": "symmetric",
        "problem": prob_label,
        "exact_ot": _fmt(ot),
        "max_t": max_t,
        "kappa": _fmt(args.kappa),
        "schedule": schedule_text,
        "record_stride": args.record_stride if args.record_stride else "geometric",
    }
    curves = []
    for variant in ("annealed", "debiased", "symmetric", "symmetric_debiased"):
        records = _run_curve(variant, schedule_text, prob, max_t, times, ot)
        write_records(out_dir / f"{variant}.csv", records)
        manifest[f"curve.{variant}"] = f"{variant};{schedule_text};{variant}.csv"
        style = {"linestyle": "--"} if variant.startswith("symmetric") else {}
        curves.append((variant, *_curve_points(records, "subopt_rounded"), style))
    _save_loglog(out_dir / "symmetric.svg", curves, "rounded suboptimality")
    write_manifest(out_dir, manifest)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otanneal",
        description="Annealed entropic transport experiments (CSV + SVG artifacts).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--problem",
            default=_DEFAULT_PROBLEM,
            help="instance file or gen:family,m,n[,seed] (default %(default)s)",
        )
        p.add_argument("--seed", type=int, default=None,
                       help="generator seed when the gen: spec omits one")
        p.add_argument("--out", default="out", help="output directory (default %(default)s)")
        p.add_argument("--record-stride", type=int, default=None, dest="record_stride",
                       help="record every k-th iteration instead of the geometric grid")

    p = sub.add_parser("pareto", help="constant-beta baselines vs annealed curves")
    common(p)
    p.add_argument("--schedule", action="append", default=None,
                   help="replace the default annealed curves (repeatable)")
    p.add_argument("--max-t", type=int, default=None, dest="max_t",
                   help="iterations per run (default 2000)")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("sweep", help="suboptimality vs annealing exponent")
    common(p)
    p.add_argument("--variant", default="annealed",
                   choices=("standard", "annealed", "debiased", "symmetric",
                            "symmetric_debiased"))
    p.add_argument("--t-eval", type=int, default=200, dest="t_eval",
                   help="evaluation iteration (default %(default)s)")
    p.add_argument("--kappa-grid", default="0.1:0.9:0.1", dest="kappa_grid",
                   help="exponent grid start:stop:step (default %(default)s)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("paths", help="optimization path vs regularization path")
    common(p)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--max-t", type=int, default=None, dest="max_t",
                   help="iterations (default 3000)")
    p.add_argument("--high-accuracy", action="store_true", dest="high_accuracy",
                   help="polish every path point to residual 1e-10")
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("plateau", help="piecewise-constant vs smooth schedule")
    common(p)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--max-t", type=int, default=None, dest="max_t",
                   help="iterations (default 2000)")
    p.set_defaults(func=cmd_plateau)

    p = sub.add_parser("symmetric", help="simultaneous-update variants")
    common(p)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--max-t", type=int, default=None, dest="max_t",
                   help="iterations (default 2000)")
    p.set_defaults(func=cmd_symmetric)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        prob, prob_label = resolve_problem(args.problem, args.seed)
        args.func(args, prob, prob_label, out_dir)
    except SolverDivergenceError as exc:
        print(f"numeric failure at iteration {exc.iteration}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
