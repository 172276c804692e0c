"""Least favorable noncentrality and guaranteed power.

Given only the minimum difference ``delta = max(alpha) - min(alpha)`` of the
``A`` effects, the sum of squared effects is bounded below by

* ``delta**2 / 2`` for a zero-mean vector,
* ``delta**2 / 2 * m / (m - 1)``, ``m = max(v, a)``, for a ``v x a`` array
  with zero row and column sums,
* ``delta**2 / 2 * m2 m3 / ((m2 - 1)(m3 - 1))`` for a ``u x v x a`` array
  with all margins zero, where ``m1 <= m2 <= m3`` are ``a, u, v`` sorted.

All three bounds are attained by rank-one arrays, see
:func:`extremal_effects`.

The variance side has three variants, chosen by how much is known:

* ``sigma_y_sq`` only: ``T`` is bounded by the total variance, the split
  that puts everything in the first term of ``T``;
* components with ``split="worst"``: ``T`` is bounded by the sum of the
  active components;
* components with ``split="given"`` (default): ``T`` is evaluated exactly and
  only the effect configuration is least favorable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .catalog import (
    DOUBLE,
    SINGLE,
    TRIPLE,
    DesignPoint,
    TestPlan,
    VarianceSpec,
    degrees_of_freedom,
    lambda_exact,
    r_factor,
    t_value,
)
from .distributions import FParams, power_from_lambda
from .errors import AnovaPowerError, DomainError, UnsupportedModelError

EXACT = "exact"
WORST_CASE = "worst-case bound"
MONTE_CARLO = "monte carlo"


@dataclass(frozen=True)
class WorstCaseInput:
    """Minimum detectable difference plus what is known about the variances."""

    delta: float
    variance: VarianceSpec

    def __post_init__(self):
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise DomainError(f"delta must be >= 0, got {self.delta!r}")

    @classmethod
    def total(cls, delta: float, sigma_y_sq: float) -> "WorstCaseInput":
        return cls(delta, VarianceSpec(sigma_y_sq=sigma_y_sq))

    @classmethod
    def components(cls, delta: float, components) -> "WorstCaseInput":
        return cls(delta, VarianceSpec.of(components))


@dataclass
class PowerResult:
    df1: float
    df2: float
    lam: float
    alpha: float
    power: float
    provenance: str
    design: dict = field(default_factory=dict)
    ci_halfwidth: float | None = None
    replications: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _dims(kind: str, dims: Mapping[str, float]) -> list[float]:
    need = {SINGLE: ("a",), DOUBLE: ("v", "a"), TRIPLE: ("u", "v", "a")}[kind]
    out = []
    for k in need:
        if k not in dims:
            raise AnovaPowerError(f"missing level count {k}")
        if not dims[k] >= 2:
            raise DomainError(f"level count {k} must be >= 2, got {dims[k]!r}")
        out.append(float(dims[k]))
    return out


def min_effect_sum(kind: str, delta: float, dims: Mapping[str, float]) -> float:
    """Smallest possible sum of squared ``A`` effects with range ``delta``."""
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta!r}")
    base = delta**2 / 2.0
    values = _dims(kind, dims)
    if kind == SINGLE:
        return base
    if kind == DOUBLE:
        m = max(values)
        return base * m / (m - 1.0)
    _, m2, m3 = sorted(values)
    return base * m2 * m3 / ((m2 - 1.0) * (m3 - 1.0))


def _spread(size: int, wide: bool) -> np.ndarray:
    # zero-sum vector with max 1 and min -1 (narrow) or -1/(size-1) (wide)
    v = np.zeros(size)
    v[0] = 1.0
    if wide:
        v[1:] = -1.0 / (size - 1)
    else:
        v[1] = -1.0
    return v


def extremal_effects(plan: TestPlan, design: DesignPoint, delta: float) -> np.ndarray:
    """Zero-margin ``A`` effects with range ``delta`` attaining :func:`min_effect_sum`.

    The result is shaped by ``plan.effect_factors``: ``(a,)``, ``(v, a)`` or
    ``(u, v, a)``.
    """
    values = design.values()
    shape = [int(values[f.lower()]) for f in plan.effect_factors]
    if any(values[f.lower()] != s for f, s in zip(plan.effect_factors, shape)):
        raise AnovaPowerError("extremal effects need integer level counts")
    if len(shape) == 1:
        vectors = [_spread(shape[0], wide=False)]
    else:
        order = sorted(range(len(shape)), key=lambda k: (shape[k], -k))
        narrow = order[0]
        vectors = [_spread(s, wide=(k != narrow)) for k, s in enumerate(shape)]
    out = np.array(delta / 2.0)
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


def _dims_of(plan: TestPlan, design: DesignPoint) -> dict[str, float]:
    return {k: v for k, v in design.values().items() if k in ("a", "u", "v")}


def active_variance(plan: TestPlan, variance: VarianceSpec) -> float:
    """Sum of the variance components that occur in ``T``."""
    if not variance.componentwise:
        return variance.total
    return sum(variance.components.get(c, 0.0) for c in plan.active_components)


def lambda_min(plan: TestPlan, design: DesignPoint, wc: WorstCaseInput, split: str = "given") -> float:
    """Least favorable noncentrality for the effects (and, if asked, the variances).

    Args:
        split: ``"given"`` evaluates ``T`` from the supplied components;
            ``"worst"`` uses the active-component sum instead. Ignored when
            only the total variance is known.
    """
    if not plan.exact:
        raise UnsupportedModelError(f"{plan.formula} has no exact F-test")
    if split not in ("given", "worst"):
        raise AnovaPowerError(f"split must be 'given' or 'worst', got {split!r}")
    s = min_effect_sum(plan.effect_kind, wc.delta, _dims_of(plan, design))
    r = r_factor(plan, design)
    if wc.variance.componentwise and split == "given":
        t = t_value(plan, design, wc.variance)
    else:
        t = active_variance(plan, wc.variance)
    if t <= 0:
        raise DomainError("the active variance components are all zero")
    return r * s / t


def best_case_lambda(plan: TestPlan, design: DesignPoint, wc: WorstCaseInput) -> float:
    """Most favorable noncentrality over variance splittings of the total.

    Infinite when the model has random components that do not occur in ``T``;
    otherwise the whole variance sits in the last term of ``T``.
    """
    inactive = set(plan.structure.random_components) - plan.active_components
    if inactive:
        return math.inf
    s = min_effect_sum(plan.effect_kind, wc.delta, _dims_of(plan, design))
    last = plan.t_terms[-1][1].evaluate(design.values())
    return r_factor(plan, design) * s * last / wc.variance.total


def _power(plan, design, lam, alpha) -> tuple[float, float, float]:
    df1, df2 = degrees_of_freedom(plan, design)
    return df1, df2, power_from_lambda(alpha, FParams(df1, df2, lam))


def guaranteed_power(
    plan: TestPlan, design: DesignPoint, wc: WorstCaseInput, alpha: float, split: str = "given"
) -> PowerResult:
    """Power at the least favorable noncentrality :func:`lambda_min`."""
    lam = lambda_min(plan, design, wc, split)
    df1, df2, power = _power(plan, design, lam, alpha)
    return PowerResult(df1, df2, lam, alpha, power, WORST_CASE, design.as_dict())


def exact_power(plan: TestPlan, design: DesignPoint, effects, variance: VarianceSpec, alpha: float) -> PowerResult:
    """Power for explicit effects and variance components."""
    lam = lambda_exact(plan, design, effects, variance)
    df1, df2, power = _power(plan, design, lam, alpha)
    return PowerResult(df1, df2, lam, alpha, power, EXACT, design.as_dict())
