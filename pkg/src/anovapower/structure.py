"""Strata and expected mean squares of balanced crossed/nested models.

A term (stratum) of a model is a set of factors closed under nesting: if a
factor is in the term, so are all factors it is nested in. Its *live*
factors are those not nested-into by another member of the term; the rest
are bracket factors, e.g. ``B(A)`` has live ``{B}`` and bracket ``{A}``.

Expected mean squares follow the restricted-model (Cornfield-Tukey) rules:
the variance component of a random term ``Y`` appears in ``E(MS_X)`` when
``X`` is a subset of ``Y`` and every live factor of ``Y`` outside ``X`` is
random; its coefficient is ``n`` times the level counts of the factors not
in ``Y``.

This module is independent of the transcribed model table and is used to
derive ANOVA strata for simulation and to cross-check the table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

from ._expr import Monomial
from .formula import FACTORS, ModelSpec

ERROR = "e"


def term_name(factors) -> str:
    """Canonical component name: factor letters in ``U V A B C`` order."""
    members = set(factors)
    return "".join(f for f in FACTORS if f in members)


@dataclass(frozen=True)
class Term:
    factors: frozenset[str]
    live: frozenset[str]
    random: bool

    @property
    def name(self) -> str:
        return term_name(self.factors)

    @property
    def bracket(self) -> frozenset[str]:
        return self.factors - self.live

    def df(self) -> Monomial:
        parts = [(f.lower(), 1) for f in FACTORS if f in self.live]
        parts += [(f.lower(), 0) for f in FACTORS if f in self.bracket]
        return Monomial(tuple(parts))

    def label(self) -> str:
        """Greek-letter label, e.g. ``beta(alpha)`` for ``B`` nested in ``A``."""
        live = ",".join(_GREEK[f] for f in FACTORS if f in self.live)
        if self.bracket:
            inner = ",".join(_GREEK[f] for f in FACTORS if f in self.bracket)
            return f"{live}({inner})"
        return live

    def cli_key(self) -> str:
        """Short CLI key, e.g. ``sbA`` for ``beta(alpha)`` or ``sab`` for ``alpha beta``."""
        live = "".join(_KEY[f] for f in FACTORS if f in self.live)
        return "s" + live + "".join(f for f in FACTORS if f in self.bracket)


_GREEK = {"U": "mu", "V": "nu", "A": "alpha", "B": "beta", "C": "gamma"}
_KEY = {"U": "u", "V": "nu", "A": "a", "B": "b", "C": "g"}


class Structure:
    """All strata of a model, with dfs and expected mean squares."""

    def __init__(self, model: ModelSpec):
        self.model = model
        factors = model.factors
        terms = []
        for mask in range(1, 2 ** len(factors)):
            members = frozenset(f for k, f in enumerate(factors) if mask >> k & 1)
            if all(model.parents_of(f) <= members for f in members):
                nested_into = set()
                for f in members:
                    nested_into |= model.parents_of(f)
                live = members - nested_into
                terms.append(Term(members, live, any(model.is_random(f) for f in live)))
        terms.sort(key=lambda t: (len(t.factors), [FACTORS.index(f) for f in sorted(t.factors, key=FACTORS.index)]))
        self.terms: tuple[Term, ...] = tuple(terms)
        self.by_name = {t.name: t for t in terms}

    @cached_property
    def a_term(self) -> Term:
        """The fixed term under test: ``A`` together with the factors it is nested in."""
        return self.by_name[term_name({"A"} | self.model.parents_of("A"))]

    @property
    def random_components(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.terms if t.random) + (ERROR,)

    def error_df(self) -> Monomial:
        parts = tuple((f.lower(), 0) for f in self.model.factors) + (("n", 1),)
        return Monomial(parts)

    def df(self, name: str) -> Monomial:
        if name == ERROR:
            return self.error_df()
        return self.by_name[name].df()

    def ems(self, name: str) -> dict[str, Monomial]:
        """Expected mean square of stratum ``name`` as ``{component: coefficient}``.

        Fixed terms report their own quadratic form under the key ``"Q"``
        with coefficient ``N / cells``; it multiplies ``sum(effects**2)/df``.
        """
        out: dict[str, Monomial] = {ERROR: Monomial(())}
        if name == ERROR:
            return out
        x = self.by_name[name]
        for y in self.terms:
            if not y.random or not x.factors <= y.factors:
                continue
            if all(self.model.is_random(f) for f in y.live - x.factors):
                out[y.name] = self._coefficient(y.factors)
        if not x.random:
            out["Q"] = self._coefficient(x.factors)
        return out

    def _coefficient(self, members) -> Monomial:
        parts = tuple((f.lower(), 0) for f in self.model.factors if f not in members)
        return Monomial(parts + (("n", 0),))

    def cells(self, name: str, levels: Mapping[str, float]) -> float:
        t = self.by_name[name]
        return math.prod(levels[f.lower()] for f in t.factors)

    def denominator(self, zero: frozenset[str] = frozenset()) -> str | None:
        """Stratum whose EMS equals that of ``A`` under H0, or None.

        Components listed in ``zero`` are treated as vanishing, which is how
        the approximate models reduce to exact ones.
        """

        def reduced(name):
            return {k: v.canonical() for k, v in self.ems(name).items() if k not in zero}

        target = reduced(self.a_term.name)
        target.pop("Q")
        for name in [t.name for t in self.terms if t != self.a_term] + [ERROR]:
            e = reduced(name)
            if "Q" not in e and e == target:
                return name
        return None

    def derived_test(self, zero: frozenset[str] = frozenset()) -> "DerivedTest | None":
        """Exact F-test of ``A`` written as ``lambda = R * S / T``, or None."""
        den = self.denominator(zero)
        if den is None:
            return None
        a = self.a_term
        factors = self.model.factors

        def prod(members, with_n=False):
            parts = tuple((f.lower(), 0) for f in factors if f in members)
            return Monomial(parts + ((("n", 0),) if with_n else ()))

        if den == ERROR:
            top = frozenset(factors)
            r = prod(top - a.factors, with_n=True)
            t_terms = [(ERROR, Monomial(()))]
        else:
            top = self.by_name[den].factors
            r = prod(top - a.factors)
            t_terms = []
            for comp in self.ems(den):
                if comp in zero:
                    continue
                if comp == ERROR:
                    t_terms.append((ERROR, prod(frozenset(factors) - top, with_n=True)))
                else:
                    t_terms.append((comp, prod(self.by_name[comp].factors - top)))
            t_terms.sort(key=lambda ct: (ct[0] == ERROR, len(ct[0]), ct[0]))
        random_in_top = [f for f in factors if f in top - a.factors and self.model.is_random(f)]
        pivot = random_in_top[0].lower() if den != ERROR and len(random_in_top) == 1 else "n"
        return DerivedTest(
            denominator=den,
            df1=a.df(),
            df2=self.df(den),
            r=r,
            t_terms=tuple(t_terms),
            pivot=pivot,
        )


@dataclass(frozen=True)
class DerivedTest:
    """Exact F-test of ``A`` as derived from expected mean squares."""

    denominator: str
    df1: Monomial
    df2: Monomial
    r: Monomial
    t_terms: tuple[tuple[str, Monomial], ...]
    pivot: str
