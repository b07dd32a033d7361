"""Inverse-temperature schedules and their step sizes.

A schedule maps an iteration index ``t >= 0`` to an inverse temperature
``beta_t > 0``; the associated step size is the backward difference
``alpha_t = beta_t - beta_{t-1}`` for ``t >= 1``.  Schedules are cheap,
stateless objects evaluated lazily, so enormous horizons cost nothing.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "Schedule",
    "ConstantSchedule",
    "PolynomialSchedule",
    "LinearSchedule",
    "ClampedGeometricSchedule",
    "PlateauSchedule",
    "plateau_update_times",
    "validate_concave",
    "parse_schedule",
]


class Schedule:
    """Base class: a nondecreasing map from iteration index to beta."""

    def beta_at(self, t: int) -> float:
        raise NotImplementedError

    def alpha_at(self, t: int) -> float:
        """Step size ``beta_t - beta_{t-1}``; defined for ``t >= 1``."""
        if t < 1:
            raise ValueError(f"alpha is defined for t >= 1, got t={t}")
        return self.beta_at(t) - self.beta_at(t - 1)

    def _check_t(self, t: int) -> None:
        if t < 0:
            raise ValueError(f"iteration index must be nonnegative, got {t}")


@dataclass(frozen=True)
class ConstantSchedule(Schedule):
    """beta_t = beta0 for all t."""

    beta0: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta0) and self.beta0 > 0.0):
            raise ValueError(f"beta0 must be positive, got {self.beta0!r}")

    def beta_at(self, t: int) -> float:
        self._check_t(t)
        return self.beta0


@dataclass(frozen=True)
class PolynomialSchedule(Schedule):
    """beta_t = beta0 * (1 + t) ** kappa.

    kappa = 0 degenerates to the constant schedule; kappa in (0, 1] gives a
    concave schedule with step sizes shrinking like t ** (kappa - 1).
    """

    beta0: float
    kappa: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta0) and self.beta0 > 0.0):
            raise ValueError(f"beta0 must be positive, got {self.beta0!r}")
        if not (math.isfinite(self.kappa) and self.kappa >= 0.0):
            raise ValueError(f"kappa must be nonnegative, got {self.kappa!r}")

    def beta_at(self, t: int) -> float:
        self._check_t(t)
        return self.beta0 * (1.0 + t) ** self.kappa


@dataclass(frozen=True)
class LinearSchedule(Schedule):
    """beta_t = beta0 + slope * t, a constant step size of `slope`."""

    beta0: float
    slope: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta0) and self.beta0 > 0.0):
            raise ValueError(f"beta0 must be positive, got {self.beta0!r}")
        if not (math.isfinite(self.slope) and self.slope >= 0.0):
            raise ValueError(f"slope must be nonnegative, got {self.slope!r}")

    def beta_at(self, t: int) -> float:
        self._check_t(t)
        return self.beta0 + self.slope * t


@dataclass(frozen=True)
class ClampedGeometricSchedule(Schedule):
    """beta_t = min(sigma ** t, beta_max); convex until it saturates."""

    sigma: float
    beta_max: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 1.0):
            raise ValueError(f"sigma must exceed 1, got {self.sigma!r}")
        if not (math.isfinite(self.beta_max) and self.beta_max > 0.0):
            raise ValueError(f"beta_max must be positive, got {self.beta_max!r}")

    def beta_at(self, t: int) -> float:
        self._check_t(t)
        # work in logs so huge t cannot overflow before the clamp applies
        if t * math.log(self.sigma) >= math.log(self.beta_max):
            return self.beta_max
        return min(self.sigma**t, self.beta_max)


@dataclass(frozen=True)
class PlateauSchedule(Schedule):
    """Piecewise-constant wrapper: the base schedule sampled at update times.

    Updates happen at t in {0} union {16 k^2 : k >= 1}; between updates beta
    is frozen at the base schedule's value from the most recent update.
    """

    base: Schedule

    def __post_init__(self) -> None:
        if not isinstance(self.base, Schedule):
            raise ValueError("base must be a Schedule")

    @staticmethod
    def last_update(t: int) -> int:
        if t < 0:
            raise ValueError(f"iteration index must be nonnegative, got {t}")
        return 16 * math.isqrt(t // 16) ** 2

    def beta_at(self, t: int) -> float:
        return self.base.beta_at(self.last_update(t))


def plateau_update_times(max_t: int) -> list[int]:
    """All plateau update times up to and including max_t."""
    if max_t < 0:
        raise ValueError(f"max_t must be nonnegative, got {max_t}")
    times = [0]
    k = 1
    while 16 * k * k <= max_t:
        times.append(16 * k * k)
        k += 1
    return times


def validate_concave(sched: Schedule, horizon: int) -> bool:
    """Check that step sizes are nonnegative and nonincreasing up to horizon.

    Tolerates floating-point jitter of 1e-12 in both comparisons.
    """
    if horizon < 2:
        raise ValueError(f"horizon must be at least 2, got {horizon}")
    prev = sched.alpha_at(1)
    if prev < -1e-12:
        return False
    for t in range(2, horizon + 1):
        alpha = sched.alpha_at(t)
        if alpha < -1e-12 or alpha > prev + 1e-12:
            return False
        prev = alpha
    return True


_FORMS = {
    "const": (1, ConstantSchedule),
    "poly": (2, PolynomialSchedule),
    "linear": (2, LinearSchedule),
    "geom": (2, ClampedGeometricSchedule),
}


def parse_schedule(text: str) -> Schedule:
    """Parse a schedule description.

    Grammar (case-insensitive):
        const:BETA | poly:BETA0,KAPPA | linear:BETA0,SLOPE |
        geom:SIGMA,BETA_MAX | plateau(<schedule>)

    Raises:
        ValueError: malformed text, unknown kind, or invalid parameters.
    """
    s = text.strip()
    wrapped = re.fullmatch(r"(?i)plateau\((.*)\)", s, flags=re.DOTALL)
    if wrapped is not None:
        return PlateauSchedule(parse_schedule(wrapped.group(1)))
    kind, sep, rest = s.partition(":")
    kind = kind.strip().lower()
    if not sep or kind not in _FORMS:
        raise ValueError(f"unrecognized schedule {text!r}")
    arity, cls = _FORMS[kind]
    fields = [f.strip() for f in rest.split(",")]
    if len(fields) != arity:
        raise ValueError(f"schedule {kind!r} takes {arity} parameter(s), got {text!r}")
    try:
        params = [float(f) for f in fields]
    except ValueError:
        raise ValueError(f"non-numeric parameter in schedule {text!r}") from None
    return cls(*params)
