"""Minimal sample size.

For real-valued parameters the minimum size for a power requirement is
reached by varying only the pivot parameter and keeping all other random
level counts and ``n`` at their minima. With integer parameters that is not
guaranteed, but the real optimum brackets the integer one: its size factor
lies between the real optimum's and that of the real optimum with the pivot
rounded up. :func:`min_size_integer` enumerates exactly that bracket.

Level counts of fixed factors (``a`` and any fixed ``b``, ``c``, ``u``,
``v``) are never searched; they come from ``fixed_dims``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Mapping

from .bounds import WorstCaseInput, guaranteed_power
from .catalog import DesignPoint, TestPlan, lookup, plan_for, restrict_variance
from .distributions import find_increasing_root
from .errors import (
    AnovaPowerError,
    InfeasibleError,
    MissingParameterError,
    UnsupportedModelError,
)
from .formula import ModelSpec

_PIVOT_CAP = 1e8


@dataclass(frozen=True)
class SizeRequest:
    """A power requirement plus everything needed to evaluate guaranteed power."""

    model: "ModelSpec | str"
    alpha: float
    power: float
    worst_case: WorstCaseInput
    fixed_dims: Mapping[str, float] = field(default_factory=dict)
    minima: Mapping[str, float] = field(default_factory=dict)
    mode: str = "integer"
    split: str = "given"
    assume_zero: tuple[str, ...] = ()

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.power < 1):
            raise AnovaPowerError("alpha and the power requirement must lie in (0, 1)")
        if self.power <= self.alpha:
            raise AnovaPowerError("the power requirement must exceed alpha")
        if self.mode not in ("integer", "real"):
            raise AnovaPowerError(f"mode must be 'integer' or 'real', got {self.mode!r}")

    @property
    def plan(self) -> TestPlan:
        return plan_for(self.model, self.worst_case.variance, self.assume_zero)


@dataclass
class TraceEntry:
    design: dict
    size_factor: float
    power: float
    feasible: bool


@dataclass
class SizeResult:
    design: dict
    size: float
    size_factor: float
    df1: float
    df2: float
    lam: float
    power: float
    mode: str
    pivot: str
    bracket: tuple[float, float] | None = None
    bracket_sizes: list[int] = field(default_factory=list)
    search_trace: list[TraceEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def pivot_parameter(plan: TestPlan) -> str:
    """The most power-effective parameter of an exact model."""
    if not plan.exact:
        raise UnsupportedModelError(f"{plan.formula} has an approximate F-test and no pivot parameter")
    return plan.pivot


class _Search:
    """Shared setup: plan, varying parameters, their minima, fixed dimensions."""

    def __init__(
        self,
        plan: TestPlan,
        worst_case: WorstCaseInput,
        alpha: float,
        split: str,
        fixed_dims: Mapping[str, float],
        minima: Mapping[str, float],
        mode: str,
        target: float | None = None,
    ):
        self.plan = plan
        self.worst_case = worst_case
        self.alpha = alpha
        self.split = split
        self.mode = mode
        self.target = target
        self.pivot = pivot_parameter(plan)
        self.varying = plan.random_params
        unknown = set(minima) - set(self.varying)
        if unknown:
            raise AnovaPowerError(f"minima given for non-searched parameters: {', '.join(sorted(unknown))}")
        for k, v in minima.items():
            if v < 2:
                raise AnovaPowerError(f"minimum for {k} must be >= 2, got {v!r}")
        self.minima = {p: float(minima.get(p, 2)) for p in self.varying}
        if mode == "integer":
            self.minima = {p: float(math.ceil(v)) for p, v in self.minima.items()}
        fixed = [p for p in plan.params if p not in self.varying]
        missing = [p for p in fixed if p not in fixed_dims]
        if missing:
            raise MissingParameterError(f"fixed level counts required for {plan.formula}: {', '.join(missing)}")
        self.fixed = {p: fixed_dims[p] for p in fixed}
        self.trace: list[TraceEntry] = []

    @classmethod
    def of(cls, req: SizeRequest, mode: str) -> "_Search":
        plan = req.plan
        return cls(
            plan,
            _reduced(req.model, plan, req.worst_case),
            req.alpha,
            req.split,
            req.fixed_dims,
            req.minima,
            mode,
            req.power,
        )

    def design(self, values: Mapping[str, float], mode: str | None = None) -> DesignPoint:
        levels = dict(self.fixed)
        levels.update({p: v for p, v in values.items() if p != "n"})
        return DesignPoint(levels, values["n"], mode or self.mode)

    def size_factor(self, values: Mapping[str, float]) -> float:
        return math.prod(values[p] for p in self.varying)

    def evaluate(self, values: Mapping[str, float], mode: str | None = None, record: bool = True):
        d = self.design(values, mode)
        res = guaranteed_power(self.plan, d, self.worst_case, self.alpha, self.split)
        if record:
            self.trace.append(TraceEntry(d.as_dict(), self.size_factor(values), res.power, res.power >= self.target))
        return d, res

    def result(self, values, res, d, **extra) -> SizeResult:
        size = math.prod(d.values().values())
        return SizeResult(
            design=d.as_dict(),
            size=size,
            size_factor=self.size_factor(values),
            df1=res.df1,
            df2=res.df2,
            lam=res.lam,
            power=res.power,
            mode=self.mode,
            pivot=self.pivot,
            search_trace=self.trace,
            **extra,
        )


def _reduced(model, plan: TestPlan, wc: WorstCaseInput) -> WorstCaseInput:
    if lookup(model).exact:
        return wc
    return WorstCaseInput(wc.delta, restrict_variance(plan, wc.variance))


def _real_pivot(search: _Search) -> float:
    base = dict(search.minima)
    target = search.target

    def gap(x: float) -> float:
        values = dict(base, **{search.pivot: x})
        return search.evaluate(values, mode="real", record=False)[1].power - target

    lo = base[search.pivot]
    if gap(lo) >= 0:
        return lo
    hi = lo
    while True:
        hi *= 2.0
        if hi > _PIVOT_CAP:
            raise InfeasibleError(
                f"power {target} is not reached for {search.pivot} up to {_PIVOT_CAP:g}; "
                "the pivot should make the noncentrality unbounded"
            )
        if gap(hi) >= 0:
            break
        lo = hi
    return find_increasing_root(gap, lo, hi, xtol=1e-12)


def min_size_real(req: SizeRequest) -> SizeResult:
    """Minimal size with real parameters: only the pivot moves off its minimum."""
    search = _Search.of(req, "real")
    x = _real_pivot(search)
    values = dict(search.minima, **{search.pivot: x})
    d, res = search.evaluate(values)
    return search.result(values, res, d)


def _factorizations(total: int, params: tuple[str, ...], minima: Mapping[str, float]) -> Iterator[dict]:
    if not params:
        if total == 1:
            yield {}
        return
    first, rest = params[0], params[1:]
    rest_min = math.prod(minima[p] for p in rest)
    for k in range(int(minima[first]), total + 1):
        if total % k or total // k < rest_min:
            continue
        for tail in _factorizations(total // k, rest, minima):
            yield {first: k, **tail}


def min_size_integer(req: SizeRequest) -> SizeResult:
    """Minimal size with integer parameters.

    Enumerates every integer design whose size factor lies between the real
    optimum and the rounded-up pivot design. Among feasible designs of the
    smallest size, prefers higher power, then lexicographically smaller
    non-pivot parameters.
    """
    search = _Search.of(req, "integer")
    x = _real_pivot(search)
    s_lo = x * math.prod(search.minima[p] for p in search.varying if p != search.pivot)
    top = math.ceil(x - 1e-12)
    while True:
        values = dict(search.minima, **{search.pivot: top})
        values = {p: int(v) for p, v in values.items()}
        if search.evaluate(values, record=False)[1].power >= req.power:
            break
        top += 1
    s_hi = int(search.size_factor(values))
    sizes = list(range(max(1, math.ceil(s_lo - 1e-9)), s_hi + 1))
    others = [p for p in search.varying if p != search.pivot]
    for s in sizes:
        feasible = []
        for values in _factorizations(s, search.varying, search.minima):
            d, res = search.evaluate(values)
            if res.power >= req.power:
                feasible.append((values, d, res))
        if feasible:
            values, d, res = min(feasible, key=lambda f: (-f[2].power, tuple(f[0][p] for p in others)))
            return search.result(values, res, d, bracket=(s_lo, float(s_hi)), bracket_sizes=sizes)
    raise InfeasibleError("no feasible integer design in the size bracket")  # pragma: no cover


def min_size(req: SizeRequest) -> SizeResult:
    return min_size_integer(req) if req.mode == "integer" else min_size_real(req)


@dataclass
class PowerRow:
    design: dict
    df1: float
    df2: float
    lam: float
    power: float


def power_table(
    model: "ModelSpec | str",
    product: int,
    alpha: float,
    worst_case: WorstCaseInput,
    fixed_dims: Mapping[str, float],
    minima: Mapping[str, float] | None = None,
    split: str = "given",
    assume_zero: Iterable[str] = (),
) -> list[PowerRow]:
    """Guaranteed power of every integer design whose varying parameters multiply to ``product``.

    Rows are sorted by increasing power.
    """
    plan = plan_for(model, worst_case.variance, assume_zero)
    search = _Search(plan, _reduced(model, plan, worst_case), alpha, split, fixed_dims, minima or {}, "integer")
    rows = []
    for values in _factorizations(int(product), search.varying, search.minima):
        d, res = search.evaluate(values, record=False)
        rows.append(PowerRow(d.as_dict(), res.df1, res.df2, res.lam, res.power))
    rows.sort(key=lambda r: (r.power, tuple(r.design[p] for p in search.varying)))
    return rows
