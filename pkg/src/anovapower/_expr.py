"""Products of level counts, the only algebra the catalog needs.

Every degrees-of-freedom, ``R`` and ``T``-coefficient entry of the model table
is a product of factors ``p`` or ``(p-1)`` over the parameters
``a, b, c, u, v, n``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

PARAMS = ("u", "v", "a", "b", "c", "n")

_TOKEN = re.compile(r"\s*(?:\(([a-z])-1\)|([a-z]))")


@dataclass(frozen=True, order=True)
class Monomial:
    """Product of ``p - shift`` factors, ``shift`` in {0, 1}."""

    factors: tuple[tuple[str, int], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "Monomial":
        text = text.strip()
        if text in ("", "1"):
            return cls(())
        factors = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise ValueError(f"bad product expression {text!r}")
            if m.group(1):
                factors.append((m.group(1), 1))
            else:
                factors.append((m.group(2), 0))
            pos = m.end()
        return cls(tuple(factors))

    @property
    def params(self) -> frozenset[str]:
        return frozenset(p for p, _ in self.factors)

    def evaluate(self, values: Mapping[str, float]) -> float:
        out = 1.0
        for p, shift in self.factors:
            out *= values[p] - shift
        return out

    def renamed(self, mapping: Mapping[str, str]) -> "Monomial":
        return Monomial(tuple((mapping.get(p, p), s) for p, s in self.factors))

    def canonical(self) -> "Monomial":
        return Monomial(tuple(sorted(self.factors, key=lambda f: (PARAMS.index(f[0]), f[1]))))

    def __mul__(self, other: "Monomial") -> "Monomial":
        return Monomial(self.factors + other.factors)

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        parts = []
        for p, shift in self.factors:
            parts.append(f"({p}-1)" if shift else p)
        return "".join(parts)


def product(values: Mapping[str, float], params) -> float:
    return math.prod(values[p] for p in params)
