"""Sparse multivariate polynomial arithmetic over named variables.

Variables are plain strings; the conventional universe is ``t``, state
variables ``x1..xn`` and inputs ``u1..um``.  Monomials are stored sparsely
(no zero exponents) and every polynomial keeps an ordered variable
universe so that monomial enumeration and coefficient layouts are
deterministic across runs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Monomial",
    "Polynomial",
    "MomentVector",
    "monomial_basis",
    "box_moments",
    "parse_polynomial",
    "variable_sort_key",
]

_VAR_PATTERN = re.compile(r"^([a-zA-Z]+)(\d*)$")


def variable_sort_key(name: str) -> tuple:
    """Canonical variable order: t first, then x1..xn, then u1..um."""
    m = _VAR_PATTERN.match(name)
    if m:
        stem, idx = m.group(1), m.group(2)
        rank = {"t": 0, "x": 1, "u": 2}.get(stem)
        if rank is not None:
            return (rank, int(idx) if idx else 0, name)
    return (3, 0, name)


def _ordered_universe(names: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(set(names), key=variable_sort_key))


class Monomial:
    """A power product of variables; exponents are positive integers."""

    __slots__ = ("_exps", "_hash")

    def __init__(self, exponents: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = dict(exponents)
        for v, e in list(items.items()):
            if e == 0:
                del items[v]
            elif e < 0 or not isinstance(e, int):
                raise ValueError(f"exponent of {v} must be a nonnegative integer, got {e}")
        self._exps = tuple(sorted(items.items(), key=lambda kv: variable_sort_key(kv[0])))
        self._hash = hash(self._exps)

    @property
    def exponents(self) -> dict[str, int]:
        return dict(self._exps)

    def degree(self) -> int:
        return sum(e for _, e in self._exps)

    def degree_in(self, var: str) -> int:
        for v, e in self._exps:
            if v == var:
                return e
        return 0

    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self._exps)

    def __mul__(self, other: "Monomial") -> "Monomial":
        exps = dict(self._exps)
        for v, e in other._exps:
            exps[v] = exps.get(v, 0) + e
        return Monomial(exps)

    def exponent_tuple(self, universe: Sequence[str]) -> tuple[int, ...]:
        exps = dict(self._exps)
        return tuple(exps.get(v, 0) for v in universe)

    def __eq__(self, other) -> bool:
        return isinstance(other, Monomial) and self._exps == other._exps

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        if not self._exps:
            return "1"
        return "*".join(v if e == 1 else f"{v}^{e}" for v, e in self._exps)

    def sort_key(self, universe: Sequence[str]) -> tuple:
        """Graded key: total degree first, then reverse-lex on exponents."""
        exps = self.exponent_tuple(universe)
        return (self.degree(), tuple(-e for e in exps))


_ONE = Monomial()


class Polynomial:
    """Sparse polynomial with float coefficients and an ordered universe.

    Coefficients that are exactly zero are never stored; no epsilon
    pruning happens here (callers that know their scale do that).
    """

    __slots__ = ("terms", "universe")

    def __init__(
        self,
        terms: Mapping[Monomial, float] | Iterable[tuple[Monomial, float]] = (),
        universe: Iterable[str] = (),
    ):
        data = {}
        names = set(universe)
        for mono, coeff in dict(terms).items():
            if coeff != 0.0:
                data[mono] = float(coeff)
            names.update(mono.variables())
        self.terms: dict[Monomial, float] = data
        self.universe: tuple[str, ...] = _ordered_universe(names)

    # -- constructors -------------------------------------------------
    @staticmethod
    def zero(universe: Iterable[str] = ()) -> "Polynomial":
        return Polynomial({}, universe)

    @staticmethod
    def constant(value: float, universe: Iterable[str] = ()) -> "Polynomial":
        return Polynomial({_ONE: value}, universe)

    @staticmethod
    def variable(name: str) -> "Polynomial":
        return Polynomial({Monomial({name: 1}): 1.0}, (name,))

    # -- queries -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((m.degree() for m in self.terms), default=0)

    def degree_in(self, var: str) -> int:
        return max((m.degree_in(var) for m in self.terms), default=0)

    def coefficient(self, mono: Monomial) -> float:
        return self.terms.get(mono, 0.0)

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0].sort_key(self.universe))

    # -- ring operations ----------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.constant(float(other))

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = terms.get(m, 0.0) + c
            if s == 0.0:
                terms.pop(m, None)
            else:
                terms[m] = s
        return Polynomial(terms, self.universe + other.universe)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.terms.items()}, self.universe)

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + self._coerce(other)

    def __mul__(self, other) -> "Polynomial":
        other = self._coerce(other)
        out: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = m1 * m2
                s = out.get(m, 0.0) + c1 * c2
                if s == 0.0:
                    out.pop(m, None)
                else:
                    out[m] = s
        return Polynomial(out, self.universe + other.universe)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0 or not isinstance(n, int):
            raise ValueError("only nonnegative integer powers")
        result = Polynomial.constant(1.0, self.universe)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- calculus -------------------------------------------------------
    def differentiate(self, var: str) -> "Polynomial":
        """Exact partial derivative; constants map to the zero polynomial."""
        out: dict[Monomial, float] = {}
        for m, c in self.terms.items():
            e = m.degree_in(var)
            if e == 0:
                continue
            exps = m.exponents
            exps[var] = e - 1
            out[Monomial(exps)] = out.get(Monomial(exps), 0.0) + c * e
        return Polynomial(out, self.universe)

    # -- evaluation -----------------------------------------------------
    def evaluate(self, point: Mapping[str, float]) -> float:
        missing = [v for v in self.universe if v not in point]
        if missing:
            raise KeyError(f"missing assignment for variables {missing}")
        total = 0.0
        for m, c in self.terms.items():
            val = c
            for v, e in m._exps:
                val *= point[v] ** e
            total += val
        return total

    def evaluate_many(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        """Vectorized evaluation; each variable maps to a 1-D array."""
        missing = [v for v in self.universe if v not in columns]
        if missing:
            raise KeyError(f"missing assignment for variables {missing}")
        n = len(next(iter(columns.values()))) if columns else 1
        # power tables keyed by (var, exponent)
        powers: dict[tuple[str, int], np.ndarray] = {}

        def pw(v: str, e: int) -> np.ndarray:
            key = (v, e)
            if key not in powers:
                powers[key] = np.asarray(columns[v], dtype=float) ** e
            return powers[key]

        total = np.zeros(n)
        for m, c in self.terms.items():
            term = np.full(n, c)
            for v, e in m._exps:
                term = term * pw(v, e)
            total += term
        return total

    # -- substitution ----------------------------------------------------
    def substitute(self, assignments: Mapping[str, "Polynomial | float"]) -> "Polynomial":
        """Replace variables by polynomials (or numbers), simultaneously."""
        subs = {
            v: (p if isinstance(p, Polynomial) else Polynomial.constant(float(p)))
            for v, p in assignments.items()
        }
        keep = [v for v in self.universe if v not in subs]
        result = Polynomial.zero(keep)
        pow_cache: dict[tuple[str, int], Polynomial] = {}

        def poly_pow(v: str, e: int) -> Polynomial:
            key = (v, e)
            if key not in pow_cache:
                pow_cache[key] = subs[v] ** e
            return pow_cache[key]

        for m, c in self.terms.items():
            term = Polynomial.constant(c, keep)
            for v, e in m._exps:
                if v in subs:
                    term = term * poly_pow(v, e)
                else:
                    term = term * Polynomial({Monomial({v: e}): 1.0})
            result = result + term
        return result

    def affine_substitute(self, maps: Mapping[str, tuple[float, float]]) -> "Polynomial":
        """Substitute ``v -> shift + scale * v`` for each mapped variable."""
        return self.substitute(
            {
                v: Polynomial.constant(a) + b * Polynomial.variable(v)
                for v, (a, b) in maps.items()
            }
        )

    def with_universe(self, names: Iterable[str]) -> "Polynomial":
        return Polynomial(self.terms, tuple(self.universe) + tuple(names))

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def __repr__(self) -> str:
        return f"Polynomial({format_polynomial(self)!r})"


def monomial_basis(variables: int | Sequence[str], degree: int) -> list[Monomial]:
    """All monomials of total degree <= degree, graded-lexicographically.

    ``variables`` may be a count (uses x1..xn) or explicit names; the
    names keep their given order inside each degree block.
    """
    if isinstance(variables, int):
        if variables < 1:
            raise ValueError("need at least one variable")
        names: Sequence[str] = [f"x{i + 1}" for i in range(variables)]
    else:
        names = list(variables)
        if not names:
            raise ValueError("need at least one variable")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    basis = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(len(names)), d):
            exps: dict[str, int] = {}
            for idx in combo:
                exps[names[idx]] = exps.get(names[idx], 0) + 1
            basis.append(Monomial(exps))
    assert len(basis) == math.comb(len(names) + degree, degree)
    return basis


@dataclass(frozen=True)
class MomentVector:
    """Lebesgue moments of a box, indexed by a monomial basis."""

    basis: tuple[Monomial, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.basis) != len(self.values):
            raise ValueError("basis/values length mismatch")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


def box_moments(
    box: Sequence[tuple[float, float]],
    degree: int,
    variables: Sequence[str] | None = None,
) -> MomentVector:
    """Moments of the Lebesgue measure on an axis-aligned box.

    The entry for x^a is the product over axes of
    (hi^(a_i+1) - lo^(a_i+1)) / (a_i+1); the constant entry is the box
    volume.
    """
    names = list(variables) if variables is not None else [f"x{i + 1}" for i in range(len(box))]
    if len(names) != len(box):
        raise ValueError("one interval per variable required")
    for lo, hi in box:
        if not lo < hi:
            raise ValueError(f"degenerate interval [{lo}, {hi}]")
    basis = monomial_basis(names, degree)
    values = []
    for mono in basis:
        acc = 1.0
        for name, (lo, hi) in zip(names, box):
            e = mono.degree_in(name)
            acc *= (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
        values.append(acc)
    return MomentVector(tuple(basis), tuple(values))


# -- text syntax -------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[a-zA-Z]\w*)"
    r"|(?P<op>[*^+-]))"
)


class PolynomialSyntaxError(ValueError):
    """Raised for malformed polynomial text or unknown identifiers."""


def parse_polynomial(text: str, universe: Sequence[str]) -> Polynomial:
    """Parse terms like ``3.0*x1^2*u1 - 0.25*x1 + 1``.

    Powers use ``^``, products need an explicit ``*`` and identifiers
    must belong to ``universe``.
    """
    allowed = set(universe)
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise PolynomialSyntaxError(
                    f"unexpected character {text[pos]!r} at position {pos} in {text!r}"
                )
            break
        pos = m.end()
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
    if not tokens:
        raise PolynomialSyntaxError("empty polynomial")

    result = Polynomial.zero(universe)
    i = 0
    n = len(tokens)
    while i < n:
        sign = 1.0
        while i < n and tokens[i][0] == "op" and tokens[i][1] in "+-":
            if tokens[i][1] == "-":
                sign = -sign
            i += 1
        if i >= n:
            raise PolynomialSyntaxError(f"dangling sign in {text!r}")
        coeff = sign
        exps: dict[str, int] = {}
        expect_factor = True
        while i < n:
            kind, tok = tokens[i]
            if kind == "op" and tok in "+-":
                break
            if kind == "op" and tok == "*":
                if expect_factor:
                    raise PolynomialSyntaxError(f"misplaced '*' in {text!r}")
                expect_factor = True
                i += 1
                continue
            if not expect_factor:
                raise PolynomialSyntaxError(
                    f"missing '*' before {tok!r} in {text!r}"
                )
            if kind == "number":
                coeff *= float(tok)
                i += 1
            elif kind == "name":
                if tok not in allowed:
                    raise PolynomialSyntaxError(
                        f"unknown identifier {tok!r} (universe: {sorted(allowed)})"
                    )
                power = 1
                i += 1
                if i + 1 < n and tokens[i] == ("op", "^"):
                    if tokens[i + 1][0] != "number" or "." in tokens[i + 1][1]:
                        raise PolynomialSyntaxError(f"bad exponent after {tok} in {text!r}")
                    power = int(tokens[i + 1][1])
                    i += 2
                exps[tok] = exps.get(tok, 0) + power
            else:
                raise PolynomialSyntaxError(f"unexpected token {tok!r} in {text!r}")
            expect_factor = False
        if expect_factor:
            raise PolynomialSyntaxError(f"empty term in {text!r}")
        result = result + Polynomial({Monomial(exps): coeff}, universe)
    return result


def format_polynomial(p: Polynomial) -> str:
    """Round-trippable text form; terms in graded order."""
    if p.is_zero():
        return "0"
    parts = []
    for mono, coeff in p.sorted_terms():
        factors = [repr(coeff)]
        for v, e in mono._exps:
            factors.append(v if e == 1 else f"{v}^{e}")
        term = "*".join(factors)
        parts.append(term)
    return " + ".join(parts).replace("+ -", "- ")
