"""Catalog of balanced 1-, 2- and 3-way models with a fixed factor ``A``.

Each exact row gives the F-test of ``H0: no A effect`` as numerator and
denominator degrees of freedom and a noncentrality ``lambda = R * S / T``
where ``S`` is the sum of squared ``A`` effects and ``T`` a weighted sum of
variance components. Rows were transcribed one by one (ditto entries
expanded); ``tests/test_catalog.py`` re-derives every row from expected mean
squares.

Variance components are named by the set of factors of their term, letters
in ``U V A B C`` order, with ``e`` for the error variance. So ``AB`` is both
the interaction ``alpha beta`` and the nested ``beta(alpha)``, whichever the
model has. :func:`canonical_component` also accepts CLI-style keys such as
``se``, ``sbA``, ``sgAB``, ``sab`` and ``snuAB``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from ._expr import Monomial
from .errors import (
    AnovaPowerError,
    ConstraintError,
    DomainError,
    MissingParameterError,
    StructuralError,
    UnsupportedModelError,
)
from .formula import FACTORS, ModelSpec, parse_model
from .structure import ERROR, Structure, term_name

SINGLE, DOUBLE, TRIPLE = "single", "double", "triple"

# (formula, pivot, df1, df2, R, S kind, T, same_as_previous)
# same_as_previous marks rows printed entirely as ditto marks.
# Approximate rows carry no test data.
_ROWS = [
    ("A", "n", "(a-1)", "a(n-1)", "n", SINGLE, "e", False),
    ("A x B", "n", "(a-1)", "ab(n-1)", "bn", SINGLE, "e", False),
    ("A > B", "n", "(a-1)", "ab(n-1)", "bn", SINGLE, "e", True),
    ("A x B~", "b", "(a-1)", "(a-1)(b-1)", "b", SINGLE, "AB + e/n", False),
    ("A > B~", "b", "(a-1)", "a(b-1)", "b", SINGLE, "AB + e/n", False),
    ("V > A", "n", "v(a-1)", "va(n-1)", "n", DOUBLE, "e", False),
    ("V~ > A", "n", "v(a-1)", "va(n-1)", "n", DOUBLE, "e", True),
    ("A x B x C", "n", "(a-1)", "abc(n-1)", "bcn", SINGLE, "e", False),
    ("A > B > C", "n", "(a-1)", "abc(n-1)", "bcn", SINGLE, "e", True),
    ("(A x B) > C", "n", "(a-1)", "abc(n-1)", "bcn", SINGLE, "e", True),
    ("(A > B) x C", "n", "(a-1)", "abc(n-1)", "bcn", SINGLE, "e", True),
    ("A x (B > C)", "n", "(a-1)", "abc(n-1)", "bcn", SINGLE, "e", True),
    ("A > B > C~", "c", "(a-1)", "ab(c-1)", "bc", SINGLE, "ABC + e/n", False),
    ("(A x B) > C~", "c", "(a-1)", "ab(c-1)", "bc", SINGLE, "ABC + e/n", True),
    ("A x (B > C~)", "c", "(a-1)", "(a-1)b(c-1)", "bc", SINGLE, "ABC + e/n", False),
    ("(A > B) x C~", "c", "(a-1)", "(a-1)(c-1)", "c", SINGLE, "AC + e/bn", False),
    ("A x B~ x C", "b", "(a-1)", "(a-1)(b-1)", "b", SINGLE, "AB + e/cn", False),
    ("(A x B~) > C", "b", "(a-1)", "(a-1)(b-1)", "b", SINGLE, "AB + e/cn", True),
    ("A x (B~ > C)", "b", "(a-1)", "(a-1)(b-1)", "b", SINGLE, "AB + e/cn", True),
    ("A > B~ > C", "b", "(a-1)", "a(b-1)", "b", SINGLE, "AB + e/cn", False),
    ("(A > B~) x C", "b", "(a-1)", "a(b-1)", "b", SINGLE, "AB + e/cn", True),
    ("A > B~ > C~", "b", "(a-1)", "a(b-1)", "b", SINGLE, "AB + ABC/c + e/cn", False),
    ("(A x B~) > C~", "b", "(a-1)", "(a-1)(b-1)", "b", SINGLE, "AB + ABC/c + e/cn", False),
    ("A x (B~ > C~)", "b", "(a-1)", "(a-1)(b-1)", "b", SINGLE, "AB + ABC/c + e/cn", True),
    ("V > A > B", "n", "v(a-1)", "vab(n-1)", "bn", DOUBLE, "e", False),
    ("(V > A) x B", "n", "v(a-1)", "vab(n-1)", "bn", DOUBLE, "e", True),
    ("V~ > A > B", "n", "v(a-1)", "vab(n-1)", "bn", DOUBLE, "e", True),
    ("(V~ > A) x B", "n", "v(a-1)", "vab(n-1)", "bn", DOUBLE, "e", True),
    ("V > A > B~", "b", "v(a-1)", "va(b-1)", "b", DOUBLE, "VAB + e/n", False),
    ("V~ > A > B~", "b", "v(a-1)", "va(b-1)", "b", DOUBLE, "VAB + e/n", True),
    ("(V > A) x B~", "b", "v(a-1)", "v(a-1)(b-1)", "b", DOUBLE, "VAB + e/n", False),
    ("(V~ > A) x B~", "b", "v(a-1)", "v(a-1)(b-1)", "b", DOUBLE, "VAB + e/n", True),
    ("U > V > A", "n", "uv(a-1)", "uva(n-1)", "n", TRIPLE, "e", False),
    ("(U x V) > A", "n", "uv(a-1)", "uva(n-1)", "n", TRIPLE, "e", True),
    ("U~ > V > A", "n", "uv(a-1)", "uva(n-1)", "n", TRIPLE, "e", True),
    ("U > V~ > A", "n", "uv(a-1)", "uva(n-1)", "n", TRIPLE, "e", True),
    ("(U x V~) > A", "n", "uv(a-1)", "uva(n-1)", "n", TRIPLE, "e", True),
    ("U~ > V~ > A", "n", "uv(a-1)", "uva(n-1)", "n", TRIPLE, "e", True),
    ("(U~ x V~) > A", "n", "uv(a-1)", "uva(n-1)", "n", TRIPLE, "e", True),
]

APPROXIMATE = ("A x B~ x C~", "(A > B~) x C~")

# Special cases of the approximate models that reduce to exact rows:
# (approximate formula, vanishing component) -> exact formula.
_EQUIVALENT = {
    ("A x B~ x C~", "AC"): "(A x B~) > C~",
    ("A x B~ x C~", "AB"): "(A x C~) > B~",
    ("(A > B~) x C~", "AB"): "(A x C~) > B~",
    ("(A > B~) x C~", "AC"): "A > B~ > C~",
}

_SWAPS = ({}, {"B": "C", "C": "B"}, {"U": "V", "V": "U"}, {"B": "C", "C": "B", "U": "V", "V": "U"})


# -- component names -----------------------------------------------------------

_ERROR_ALIASES = {"e", "se", "s", "error", "sigma2", "sigma^2", "s2", "residual", "sigma"}
_KEY_TOKENS = [("nu", "V"), ("mu", "U"), ("a", "A"), ("b", "B"), ("g", "C"), ("c", "C"), ("v", "V"), ("u", "U")]


def canonical_component(key: str) -> str:
    """Normalize a variance-component key to its canonical factor-set name.

    >>> canonical_component("sbA"), canonical_component("sgAB"), canonical_component("se")
    ('AB', 'ABC', 'e')
    """
    raw = key.strip()
    if raw.lower() in _ERROR_ALIASES:
        return ERROR
    text = re.sub(r"[\s_(),]", "", raw)
    if text.lower().startswith("sigma"):
        text = text[5:]
    elif text.startswith("s"):
        text = text[1:]
    letters: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in FACTORS:
            letters.append(ch)
            i += 1
            continue
        for token, factor in _KEY_TOKENS:
            if text.startswith(token, i):
                letters.append(factor)
                i += len(token)
                break
        else:
            raise AnovaPowerError(f"unrecognized variance component {key!r}")
    if not letters or len(set(letters)) != len(letters):
        raise AnovaPowerError(f"unrecognized variance component {key!r}")
    return term_name(letters)


def _parse_number(value) -> float:
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    return float(value)


def parse_assignments(text: str) -> dict[str, float]:
    """Parse ``"k=v,k=v"`` with fractions allowed in values (``sbA=1/18``)."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise AnovaPowerError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_number(v)
    return out


# -- designs and variances -----------------------------------------------------


@dataclass(frozen=True)
class DesignPoint:
    """Numbers of levels plus replicates.

    ``levels`` maps lowercase parameter names (``a``, ``b``, ``c``, ``u``,
    ``v``) to counts. In ``"integer"`` mode every count must be an integer
    ``>= 2``; in ``"real"`` mode any real ``> 1``.
    """

    levels: Mapping[str, float]
    n: float
    mode: str = "integer"

    def __post_init__(self):
        if self.mode not in ("integer", "real"):
            raise AnovaPowerError(f"mode must be 'integer' or 'real', got {self.mode!r}")
        clean = {}
        for k, v in dict(self.levels).items():
            k = k.lower()
            if k not in ("a", "b", "c", "u", "v"):
                raise AnovaPowerError(f"unknown level parameter {k!r}")
            clean[k] = self._check(k, v)
        object.__setattr__(self, "levels", clean)
        object.__setattr__(self, "n", self._check("n", self.n))

    def _check(self, name, value):
        value = float(value)
        if self.mode == "integer":
            if value != int(value) or value < 2:
                raise AnovaPowerError(f"{name} must be an integer >= 2 in integer mode, got {value:g}")
            return int(value)
        if not (value > 1 and math.isfinite(value)):
            raise AnovaPowerError(f"{name} must be a real number > 1, got {value!r}")
        return value

    def values(self) -> dict[str, float]:
        out = dict(self.levels)
        out["n"] = self.n
        return out

    def get(self, param: str) -> float:
        return self.n if param == "n" else self.levels[param]

    def replace(self, **changes) -> "DesignPoint":
        levels = dict(self.levels)
        n = changes.pop("n", self.n)
        mode = changes.pop("mode", self.mode)
        levels.update(changes)
        return DesignPoint(levels, n, mode)

    def as_dict(self) -> dict:
        return {**self.levels, "n": self.n}


@dataclass(frozen=True)
class VarianceSpec:
    """Either named variance components or only the total variance.

    Exactly one of ``components`` and ``sigma_y_sq`` is given. Component keys
    are normalized with :func:`canonical_component`.
    """

    components: Mapping[str, float] | None = None
    sigma_y_sq: float | None = None

    def __post_init__(self):
        if (self.components is None) == (self.sigma_y_sq is None):
            raise AnovaPowerError("give either variance components or sigma_y_sq, not both")
        if self.components is not None:
            clean: dict[str, float] = {}
            for k, v in dict(self.components).items():
                name = canonical_component(k)
                value = _parse_number(v)
                if name in clean:
                    raise AnovaPowerError(f"variance component {name} given twice")
                if not (value >= 0 and math.isfinite(value)):
                    raise DomainError(f"variance component {k} must be >= 0, got {value!r}")
                clean[name] = value
            object.__setattr__(self, "components", clean)
        else:
            value = float(self.sigma_y_sq)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"sigma_y_sq must be > 0, got {value!r}")
            object.__setattr__(self, "sigma_y_sq", value)

    @classmethod
    def of(cls, spec: "str | Mapping[str, float] | VarianceSpec") -> "VarianceSpec":
        if isinstance(spec, VarianceSpec):
            return spec
        if isinstance(spec, str):
            spec = parse_assignments(spec)
        return cls(components=spec)

    @property
    def componentwise(self) -> bool:
        return self.components is not None

    @property
    def total(self) -> float:
        if self.components is not None:
            return sum(self.components.values())
        return self.sigma_y_sq

    def get(self, name: str, default: float | None = None) -> float:
        if self.components is None:
            raise AnovaPowerError("variance is given only as a total; components are unknown")
        name = canonical_component(name)
        if name in self.components:
            return self.components[name]
        if default is None:
            raise AnovaPowerError(f"variance component {name} is not specified")
        return default

    def zeros(self) -> frozenset[str]:
        if self.components is None:
            return frozenset()
        return frozenset(k for k, v in self.components.items() if v == 0.0)


# -- test plans ----------------------------------------------------------------


def _parse_t(text: str) -> tuple[tuple[str, Monomial], ...]:
    terms = []
    for part in text.split("+"):
        part = part.strip()
        comp, _, den = part.partition("/")
        terms.append((comp.strip(), Monomial.parse(den)))
    return tuple(terms)


def _rename_component(name: str, mapping: Mapping[str, str]) -> str:
    if name == ERROR:
        return name
    return term_name(mapping.get(f, f) for f in name)


def _rename_formula(text: str, mapping: Mapping[str, str]) -> str:
    return "".join(mapping.get(ch, ch) for ch in text)


@dataclass(frozen=True)
class TestPlan:
    """Catalog data for one model, written in the caller's factor letters."""

    __test__ = False  # not a pytest class

    formula: str
    row: int
    model: ModelSpec
    exact: bool
    effect_kind: str
    df1: Monomial
    df2: Monomial | None = None
    r: Monomial | None = None
    t_terms: tuple[tuple[str, Monomial], ...] = ()
    pivot: str | None = None
    same_as_previous: bool = False

    @property
    def active_components(self) -> frozenset[str]:
        return frozenset(c for c, _ in self.t_terms) | {ERROR}

    @property
    def effect_factors(self) -> tuple[str, ...]:
        """Factors indexing the ``A`` effects, e.g. ``("V", "A")``."""
        return tuple(f for f in FACTORS if f in {"A"} | self.model.parents_of("A"))

    @cached_property
    def structure(self) -> Structure:
        return Structure(self.model)

    @property
    def params(self) -> tuple[str, ...]:
        return self.model.params

    @property
    def random_params(self) -> tuple[str, ...]:
        """Level counts of random factors plus ``n``: the parameters a size search varies."""
        return tuple(f.lower() for f in self.model.factors if self.model.is_random(f)) + ("n",)

    def signature(self):
        """Row data without names, to compare dittoed rows."""
        return (
            self.exact,
            self.effect_kind,
            self.pivot,
            self.df1.canonical(),
            self.df2.canonical() if self.df2 else None,
            self.r.canonical() if self.r else None,
            tuple((c, m.canonical()) for c, m in self.t_terms),
        )

    def t_text(self) -> str:
        parts = []
        for comp, den in self.t_terms:
            parts.append(comp if not den.factors else f"{comp}/{den}")
        return " + ".join(parts)

    def renamed(self, mapping: Mapping[str, str], model: ModelSpec | None = None) -> "TestPlan":
        if not mapping:
            return self if model is None else replace(self, model=model)
        low = {k.lower(): v.lower() for k, v in mapping.items()}
        return TestPlan(
            formula=_rename_formula(self.formula, mapping),
            row=self.row,
            model=model if model is not None else self.model.renamed(mapping),
            exact=self.exact,
            effect_kind=self.effect_kind,
            df1=self.df1.renamed(low),
            df2=self.df2.renamed(low) if self.df2 else None,
            r=self.r.renamed(low) if self.r else None,
            t_terms=tuple((_rename_component(c, mapping), m.renamed(low)) for c, m in self.t_terms),
            pivot=low.get(self.pivot, self.pivot) if self.pivot else None,
            same_as_previous=self.same_as_previous,
        )


def _build_catalog() -> tuple[TestPlan, ...]:
    plans = []
    for k, (formula, pivot, df1, df2, r, kind, t, ditto) in enumerate(_ROWS, start=1):
        plans.append(
            TestPlan(
                formula=formula,
                row=k,
                model=parse_model(formula),
                exact=True,
                effect_kind=kind,
                df1=Monomial.parse(df1),
                df2=Monomial.parse(df2),
                r=Monomial.parse(r),
                t_terms=_parse_t(t),
                pivot=pivot,
                same_as_previous=ditto,
            )
        )
    for k, formula in enumerate(APPROXIMATE, start=len(_ROWS) + 1):
        plans.append(
            TestPlan(
                formula=formula,
                row=k,
                model=parse_model(formula),
                exact=False,
                effect_kind=SINGLE,
                df1=Monomial.parse("(a-1)"),
            )
        )
    return tuple(plans)


CATALOG: tuple[TestPlan, ...] = _build_catalog()
_INDEX = {plan.model.key: plan for plan in CATALOG}
_APPROX_INDEX = {parse_model(f).key: f for f in APPROXIMATE}


def _as_model(model: "ModelSpec | str") -> ModelSpec:
    return parse_model(model) if isinstance(model, str) else model


def lookup(model: "ModelSpec | str") -> TestPlan:
    """Catalog entry for ``model``, expressed in the model's own letters.

    Formulas that differ from a catalog row only by swapping ``B``/``C`` or
    ``U``/``V`` map onto that row, e.g. ``(A x C~) > B~`` onto
    ``(A x B~) > C~`` with pivot ``c``.

    Raises:
        StructuralError: if no catalog row matches.
    """
    spec = _as_model(model)
    for swap in _SWAPS:
        plan = _INDEX.get(spec.renamed(swap).key)
        if plan is not None:
            return plan.renamed(swap, model=spec)
    raise StructuralError(f"model {spec.formula or spec.key!r} is not in the catalog")


def resolve_model(model: "ModelSpec | str") -> ModelSpec:
    """Parse ``model`` and make sure it is a catalog model."""
    spec = _as_model(model)
    lookup(spec)
    return spec


def equivalent_exact(model: "ModelSpec | str", zero: Iterable[str]) -> TestPlan | None:
    """Exact catalog plan equivalent to an approximate model with vanishing components.

    ``zero`` lists variance components known to be zero. Returns None when
    the model is exact already or no equivalence applies.
    """
    spec = _as_model(model)
    zero = {canonical_component(z) for z in zero}
    for swap in _SWAPS:
        base = _APPROX_INDEX.get(spec.renamed(swap).key)
        if base is None:
            continue
        for (approx, comp), exact in _EQUIVALENT.items():
            if approx == base and _rename_component(comp, swap) in zero:
                return lookup(_rename_formula(exact, swap))
        return None
    return None


def plan_for(model: "ModelSpec | str", variance: VarianceSpec | None = None, zero: Iterable[str] = ()) -> TestPlan:
    """Exact plan for ``model``, reducing approximate models when possible.

    An approximate model reduces to an exact row when one of its interaction
    components is known to vanish, either as a zero entry of ``variance`` or
    by being listed in ``zero``.
    """
    plan = lookup(model)
    if plan.exact:
        return plan
    vanishing = set(canonical_component(z) for z in zero)
    if variance is not None:
        vanishing |= variance.zeros()
    eq = equivalent_exact(plan.model, vanishing)
    if eq is not None:
        return eq
    raise UnsupportedModelError(
        f"model {plan.formula} has no exact F-test; declare a vanishing interaction "
        "component or use the Monte Carlo engine"
    )


def restrict_variance(plan: TestPlan, variance: VarianceSpec) -> VarianceSpec:
    """Drop components that are not strata of ``plan``.

    Used after reducing an approximate model: components of the original
    model that the equivalent exact model pools (or that vanish) are not
    named there.
    """
    if not variance.componentwise:
        return variance
    known = set(plan.structure.random_components)
    return VarianceSpec({k: v for k, v in variance.components.items() if k in known})


# -- evaluation ----------------------------------------------------------------


def _values(plan: TestPlan, design: DesignPoint, needed: Iterable[str]) -> dict[str, float]:
    values = design.values()
    missing = sorted(set(needed) - set(values), key="uvabcn".index)
    if missing:
        raise MissingParameterError(f"design for {plan.formula} is missing {', '.join(missing)}")
    return values


def degrees_of_freedom(plan: TestPlan, design: DesignPoint) -> tuple[float, float]:
    """Numerator and denominator degrees of freedom at ``design``."""
    if not plan.exact:
        raise UnsupportedModelError(f"{plan.formula} has no exact F-test")
    values = _values(plan, design, plan.df1.params | plan.df2.params)
    return plan.df1.evaluate(values), plan.df2.evaluate(values)


def r_factor(plan: TestPlan, design: DesignPoint) -> float:
    return plan.r.evaluate(_values(plan, design, plan.r.params))


def t_value(plan: TestPlan, design: DesignPoint, variance: VarianceSpec) -> float:
    """``T`` of ``lambda = R S / T`` from componentwise variances."""
    check_components(plan, variance)
    needed = set().union(*(m.params for _, m in plan.t_terms))
    values = _values(plan, design, needed)
    total = 0.0
    for comp, den in plan.t_terms:
        if comp not in variance.components:
            raise AnovaPowerError(f"variance component {comp} (in T) is not specified")
        total += variance.components[comp] / den.evaluate(values)
    return total


def check_components(plan: TestPlan, variance: VarianceSpec) -> None:
    if not variance.componentwise:
        raise AnovaPowerError("componentwise variances are required here")
    known = set(plan.structure.random_components)
    unknown = set(variance.components) - known
    if unknown:
        raise AnovaPowerError(
            f"{', '.join(sorted(unknown))} not a variance component of {plan.formula}; "
            f"expected some of {', '.join(sorted(known))}"
        )


def check_zero_margins(effects: np.ndarray, factors: tuple[str, ...], tol: float = 1e-9) -> None:
    """Every one-dimensional margin sum of ``effects`` must vanish."""
    failures = []
    for axis, name in enumerate(factors):
        sums = effects.sum(axis=axis)
        bad = np.argwhere(np.abs(np.atleast_1d(sums)) > tol)
        for idx in bad[:5]:
            where = ", ".join(f"{f}={i + 1}" for f, i in zip([f for f in factors if f != name], idx))
            value = np.atleast_1d(sums)[tuple(idx)]
            failures.append(f"sum over {name}" + (f" at {where}" if where else "") + f" = {value:.3g}")
    if failures:
        raise ConstraintError("effects violate the zero-mean constraints: " + "; ".join(failures))


def effect_array(plan: TestPlan, design: DesignPoint, effects) -> np.ndarray:
    """Validate and shape ``effects`` to the ``A`` effect array of ``plan``."""
    values = _values(plan, design, [f.lower() for f in plan.effect_factors])
    shape = tuple(values[f.lower()] for f in plan.effect_factors)
    if any(int(s) != s for s in shape):
        raise AnovaPowerError("explicit effects need integer level counts")
    shape = tuple(int(s) for s in shape)
    arr = np.asarray(effects, dtype=float)
    if arr.size != math.prod(shape):
        raise AnovaPowerError(f"expected {math.prod(shape)} effects for shape {shape}, got {arr.size}")
    arr = arr.reshape(shape)
    check_zero_margins(arr, plan.effect_factors)
    return arr


def lambda_exact(plan: TestPlan, design: DesignPoint, effects, variance: VarianceSpec) -> float:
    """Noncentrality ``R * sum(effects**2) / T`` for explicit effects and variances."""
    if not plan.exact:
        raise UnsupportedModelError(f"{plan.formula} has no exact F-test")
    arr = effect_array(plan, design, effects)
    t = t_value(plan, design, variance)
    if t <= 0:
        raise DomainError("T vanishes: the variance components in T are all zero")
    return r_factor(plan, design) * float(np.sum(arr**2)) / t


__all__ = [
    "APPROXIMATE",
    "CATALOG",
    "DesignPoint",
    "TestPlan",
    "VarianceSpec",
    "canonical_component",
    "check_zero_margins",
    "degrees_of_freedom",
    "effect_array",
    "equivalent_exact",
    "lambda_exact",
    "lookup",
    "parse_assignments",
    "plan_for",
    "r_factor",
    "resolve_model",
    "restrict_variance",
    "t_value",
]
