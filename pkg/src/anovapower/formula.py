"""Text grammar for balanced classification models.

Grammar (whitespace ignored)::

    model  := cross ( '>' cross )*
    cross  := atom ( 'x' atom )*
    atom   := FACTOR [ '~' ] | '(' model ')'
    FACTOR := 'A' | 'B' | 'C' | 'U' | 'V'

``x`` (also ``*`` or ``×``) crosses factors, ``>`` (also ``≻``) nests the
right-hand side in the left-hand side, and a trailing ``~`` marks a random
factor. ``x`` binds tighter than ``>``, so ``V > A x B`` means
``V > (A x B)``. ``A`` is the fixed factor under test; ``B`` and ``C`` are
crossed with or nested in ``A``; ``U`` and ``V`` are factors that ``A`` is
nested in.

Examples: ``"A"``, ``"A x B~"``, ``"A > B~ > C~"``, ``"(A x C~) > B~"``,
``"(V~ > A) x B~"``, ``"(U x V~) > A"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import FormulaError, StructuralError

FACTORS = ("U", "V", "A", "B", "C")
_CROSS = {"x", "X", "*", "×"}
_NEST = {">", "≻"}


@dataclass(frozen=True)
class ModelSpec:
    """A parsed model: factors, their (transitive) nesting parents, randomness.

    Two specs compare equal when they describe the same structure; the
    original text is carried along but excluded from comparison.
    """

    factors: tuple[str, ...]
    parents: tuple[tuple[str, frozenset[str]], ...]
    random: frozenset[str]
    formula: str = ""

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def key(self):
        return (self.factors, self.parents, self.random)

    def parents_of(self, factor: str) -> frozenset[str]:
        return dict(self.parents)[factor]

    def is_random(self, factor: str) -> bool:
        return factor in self.random

    @property
    def params(self) -> tuple[str, ...]:
        """Level-count parameter names, plus ``n``."""
        return tuple(f.lower() for f in self.factors) + ("n",)

    def renamed(self, mapping: Mapping[str, str], formula: str | None = None) -> "ModelSpec":
        """Apply a factor-letter permutation (e.g. ``{"B": "C", "C": "B"}``)."""

        def r(f):
            return mapping.get(f, f)

        return _make_spec(
            [r(f) for f in self.factors],
            {r(f): frozenset(r(p) for p in ps) for f, ps in self.parents},
            frozenset(r(f) for f in self.random),
            self.formula if formula is None else formula,
        )

    def __str__(self):
        return self.formula or repr(self.key)


def _make_spec(factors, parents, random, formula) -> ModelSpec:
    ordered = tuple(f for f in FACTORS if f in factors)
    return ModelSpec(
        factors=ordered,
        parents=tuple((f, frozenset(parents.get(f, ()))) for f in ordered),
        random=frozenset(random),
        formula=formula,
    )


# -- tokenizer / recursive descent -------------------------------------------


def _tokenize(text: str):
    tokens = []
    for pos, ch in enumerate(text):
        if ch.isspace():
            continue
        if ch in FACTORS:
            tokens.append(("factor", ch, pos))
        elif ch == "~":
            tokens.append(("random", ch, pos))
        elif ch in _CROSS:
            tokens.append(("cross", ch, pos))
        elif ch in _NEST:
            tokens.append(("nest", ch, pos))
        elif ch in "()":
            tokens.append((ch, ch, pos))
        else:
            raise FormulaError(f"unexpected character {ch!r}", text, pos)
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def error(self, message):
        tok = self.peek()
        pos = tok[2] if tok else len(self.text)
        raise FormulaError(message, self.text, pos)

    def parse(self):
        if not self.tokens:
            raise FormulaError("empty formula", self.text, 0)
        node = self.nest()
        if self.peek() is not None:
            self.error("unexpected token")
        return node

    def nest(self):
        parts = [self.cross()]
        while self.peek() and self.peek()[0] == "nest":
            self.i += 1
            parts.append(self.cross())
        return parts[0] if len(parts) == 1 else ("nest", parts)

    def cross(self):
        parts = [self.atom()]
        while self.peek() and self.peek()[0] == "cross":
            self.i += 1
            parts.append(self.atom())
        return parts[0] if len(parts) == 1 else ("cross", parts)

    def atom(self):
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of formula")
        if tok[0] == "factor":
            self.i += 1
            random = False
            if self.peek() and self.peek()[0] == "random":
                self.i += 1
                random = True
            return ("factor", tok[1], random, tok[2])
        if tok[0] == "(":
            self.i += 1
            node = self.nest()
            if not self.peek() or self.peek()[0] != ")":
                self.error("missing ')'")
            self.i += 1
            return node
        self.error("expected a factor or '('")


def _leaves(node):
    if node[0] == "factor":
        return [node]
    return [leaf for child in node[1] for leaf in _leaves(child)]


def parse_model(formula: str) -> ModelSpec:
    """Parse a model formula into a :class:`ModelSpec`.

    Only checks the grammar and the structural rules on factor roles; whether
    the model is in the catalog is decided by :func:`anovapower.catalog.lookup`.

    Raises:
        FormulaError: on a syntax error (message carries the position).
        StructuralError: on a grammatical formula that breaks a structural rule.
    """
    text = formula
    tree = _Parser(text).parse()
    leaves = _leaves(tree)

    seen = {}
    for _, name, random, pos in leaves:
        if name in seen:
            raise FormulaError(f"factor {name} appears twice", text, pos)
        seen[name] = random
    if "A" not in seen:
        raise StructuralError(f"{text!r}: the fixed factor A under test is missing")
    if seen["A"]:
        raise StructuralError(f"{text!r}: factor A is the factor under test and must be fixed")

    parents: dict[str, set[str]] = {name: set() for name in seen}

    def walk(node):
        if node[0] == "factor":
            return
        for child in node[1]:
            walk(child)
        if node[0] == "nest":
            outer: set[str] = set()
            for k, child in enumerate(node[1]):
                inner = [leaf[1] for leaf in _leaves(child)]
                if k > 0 and _has_crossing(child):
                    raise StructuralError(f"{text!r}: nesting of crossed factors into others is not supported")
                for f in inner:
                    parents[f] |= outer
                outer |= set(inner)

    walk(tree)

    for f in ("U", "V"):
        if f in seen and f not in parents["A"]:
            raise StructuralError(f"{text!r}: {f} may only appear as a factor that A is nested in")
    for f in ("B", "C"):
        if f in parents["A"]:
            raise StructuralError(f"{text!r}: A cannot be nested in {f}; use U or V for such factors")
    for f in ("U", "V"):
        if f in seen and parents[f] - {"U", "V"}:
            raise StructuralError(f"{text!r}: {f} cannot be nested in A, B or C")

    return _make_spec(
        list(seen),
        {f: frozenset(ps) for f, ps in parents.items()},
        frozenset(f for f, r in seen.items() if r),
        text,
    )


def _has_crossing(node) -> bool:
    if node[0] == "factor":
        return False
    if node[0] == "cross":
        return True
    return any(_has_crossing(child) for child in node[1])
