"""Seeded benchmark instance generators and Problem file I/O.

Randomness comes from a counter-based 64-bit mix function (the splitmix64
finalizer), so instances are a pure function of (family, m, n, seed) and are
bit-reproducible across platforms and from any language that implements the
same mix.  Each drawn quantity owns fixed counter indices, documented in the
generator docstrings, so adding draws never perturbs existing ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Problem, osc_norm

__all__ = [
    "DEFAULT_SEEDS",
    "GeneratorSpec",
    "mix64",
    "uniform01",
    "normal_pairs",
    "gen_random",
    "gen_geometric",
    "geometric_clouds",
    "generate",
    "save_problem",
    "load_problem",
]

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_BLOB_CENTERS = np.array([[0.0, 0.0], [1.0, 0.2], [0.4, 1.0]])
_BLOB_STD = 0.08
_ANNULUS_CENTER = (0.5, 0.5)
_ANNULUS_RADII = (0.7, 0.9)

# Benchmark seeds: fixed draws so experiments refer to one shared instance
# per family rather than to whatever seed a caller happens to pick.
DEFAULT_SEEDS = {"random": 0, "geometric": 398}


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of a benchmark instance.

    Fields:
        family: "random" (normal cost, uniform weights) or "geometric"
            (planar blobs vs annulus, squared Euclidean cost).
        m, n: numbers of source and target points.
        seed: 64-bit stream seed (reduced modulo 2**64).
        normalize_osc: rescale the cost to unit oscillation norm.
    """

    family: str
    m: int
    n: int
    seed: int
    normalize_osc: bool = True

    def __post_init__(self) -> None:
        if self.family not in ("random", "geometric"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"sizes must be at least 1, got ({self.m}, {self.n})")
        object.__setattr__(self, "seed", int(self.seed) % 2**64)


def mix64(seed: int, counters: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer of ``seed + (counter + 1) * golden`` per counter."""
    idx = np.asarray(counters, dtype=np.uint64) + np.uint64(1)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + idx * _GOLD
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def uniform01(seed: int, counters: np.ndarray) -> np.ndarray:
    """One uniform [0, 1) draw per counter: the top 53 bits of mix64."""
    return (mix64(seed, counters) >> np.uint64(11)) * 2.0**-53


def normal_pairs(seed: int, base: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Box-Muller pairs from counters (base, base + 1).

    Returns two independent standard normal arrays, one pair per base
    counter: ``r cos(2 pi u2)`` and ``r sin(2 pi u2)`` with
    ``r = sqrt(-2 log(1 - u1))``.
    """
    base = np.asarray(base, dtype=np.uint64)
    u1 = uniform01(seed, base)
    u2 = uniform01(seed, base + np.uint64(1))
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    return r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)


def _finish(cost: np.ndarray, p: np.ndarray, q: np.ndarray, spec: GeneratorSpec) -> Problem:
    if spec.normalize_osc:
        cost = cost / osc_norm(cost)
    return Problem(cost=cost, p=p, q=q, label=f"{spec.family}-{spec.m}x{spec.n}-{spec.seed}")


def gen_random(spec: GeneratorSpec) -> Problem:
    """Standard-normal cost with uniform random weights.

    Counter layout: cost entries come from Box-Muller pairs on counters
    [0, 2 ceil(mn/2)), emitted in (cos, sin) interleaved order and truncated
    to mn values in row-major order; p and q occupy the next m and n
    counters.  Zero weights trigger a redraw from the following block.
    """
    if spec.family != "random":
        raise ValueError(f"expected family 'random', got {spec.family!r}")
    m, n = spec.m, spec.n
    npairs = (m * n + 1) // 2
    base = np.arange(npairs, dtype=np.uint64) * np.uint64(2)
    z0, z1 = normal_pairs(spec.seed, base)
    flat = np.empty(2 * npairs)
    flat[0::2] = z0
    flat[1::2] = z1
    cost = flat[: m * n].reshape(m, n)
    start = 2 * npairs
    shift = 0
    while True:
        p = uniform01(spec.seed, start + shift + np.arange(m, dtype=np.uint64))
        q = uniform01(spec.seed, start + shift + m + np.arange(n, dtype=np.uint64))
        if np.all(p > 0.0) and np.all(q > 0.0):
            break
        shift += m + n
    return _finish(cost, p / p.sum(), q / q.sum(), spec)


def geometric_clouds(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray]:
    """The two planar point clouds behind the geometric family.

    X: m points from three isotropic Gaussian blobs, centers (0,0), (1,0.2),
    (0.4,1), std 0.08; point i uses counter 3i for the blob pick and the
    Box-Muller pair (3i+1, 3i+2) for its offset.  Y: n points uniform on the
    annulus centered at (0.5,0.5) with radii 0.7-0.9 (area-uniform); point j
    uses counters (3m+2j, 3m+2j+1) for angle and radius.
    """
    m, n = spec.m, spec.n
    i3 = np.arange(m, dtype=np.uint64) * np.uint64(3)
    picks = uniform01(spec.seed, i3)
    blob = np.minimum((3.0 * picks).astype(np.int64), 2)
    z0, z1 = normal_pairs(spec.seed, i3 + np.uint64(1))
    x_cloud = _BLOB_CENTERS[blob] + _BLOB_STD * np.stack([z0, z1], axis=1)
    jbase = np.uint64(3 * m) + np.arange(n, dtype=np.uint64) * np.uint64(2)
    u_theta = uniform01(spec.seed, jbase)
    u_rad = uniform01(spec.seed, jbase + np.uint64(1))
    theta = 2.0 * np.pi * u_theta
    r_in, r_out = _ANNULUS_RADII
    radius = np.sqrt(r_in**2 + u_rad * (r_out**2 - r_in**2))
    y_cloud = np.stack(
        [
            _ANNULUS_CENTER[0] + radius * np.cos(theta),
            _ANNULUS_CENTER[1] + radius * np.sin(theta),
        ],
        axis=1,
    )
    return x_cloud, y_cloud


def gen_geometric(spec: GeneratorSpec) -> Problem:
    """Squared-distance cost between Gaussian blobs and an annulus.

    Marginals are exactly uniform: p = 1/m, q = 1/n.
    """
    if spec.family != "geometric":
        raise ValueError(f"expected family 'geometric', got {spec.family!r}")
    x_cloud, y_cloud = geometric_clouds(spec)
    cost = ((x_cloud[:, None, :] - y_cloud[None, :, :]) ** 2).sum(-1)
    p = np.full(spec.m, 1.0 / spec.m)
    q = np.full(spec.n, 1.0 / spec.n)
    return _finish(cost, p, q, spec)


def generate(spec: GeneratorSpec) -> Problem:
    """Dispatch to the family's generator."""
    return gen_random(spec) if spec.family == "random" else gen_geometric(spec)


def save_problem(prob: Problem, path) -> None:
    """Write a Problem as UTF-8 text.

    Format: line 1 holds `m n`; line 2 the m entries of p; line 3 the n
    entries of q; then m lines of n cost entries.  Decimals carry 17
    significant digits, so float64 values round-trip exactly.
    """
    def row(vals) -> str:
        return " ".join(f"{v:.17g}" for v in vals)

    lines = [f"{prob.m} {prob.n}", row(prob.p), row(prob.q)]
    lines.extend(row(r) for r in prob.cost)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_row(line: str, lineno: int, width: int) -> np.ndarray:
    parts = line.split()
    if len(parts) != width:
        raise ValueError(f"line {lineno}: expected {width} values, got {len(parts)}")
    try:
        return np.array([float(v) for v in parts])
    except ValueError:
        raise ValueError(f"line {lineno}: non-numeric value") from None


def load_problem(path) -> Problem:
    """Read a Problem written by save_problem.

    Raises:
        ValueError: truncated or malformed file; the message names the
            offending line (1-based).
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("line 1: empty file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError("line 1: expected `m n`")
    try:
        m, n = int(header[0]), int(header[1])
    except ValueError:
        raise ValueError("line 1: sizes must be integers") from None
    if m < 1 or n < 1:
        raise ValueError(f"line 1: sizes must be positive, got {m} {n}")
    if len(lines) < 3 + m:
        raise ValueError(f"line {len(lines) + 1}: file truncated, expected {3 + m} lines")
    p = _parse_row(lines[1], 2, m)
    q = _parse_row(lines[2], 3, n)
    cost = np.stack([_parse_row(lines[3 + i], 4 + i, n) for i in range(m)])
    return Problem(cost=cost, p=p, q=q)
