"""Satisfiability of linear timing constraints over non-negative reals.

Fourier-Motzkin elimination in exact rational arithmetic, tracking strict
and non-strict inequalities.  A satisfying point is rebuilt by
back-substitution in reverse elimination order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

from .core import Comparator, TimeConstraint

_NEGATE = {
    Comparator.LT: Comparator.GE,
    Comparator.GT: Comparator.LE,
    Comparator.LE: Comparator.GT,
    Comparator.GE: Comparator.LT,
}


@dataclass(frozen=True)
class LinSystem:
    """A conjunction of timing constraints; every variable is implicitly >= 0."""

    constraints: tuple = ()
    vars: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        cons = tuple(self.constraints)
        names = set(self.vars)
        for c in cons:
            names.update(c.vars)
        object.__setattr__(self, "constraints", cons)
        object.__setattr__(self, "vars", frozenset(names))


@dataclass(frozen=True)
class _Ineq:
    """``sum(coefs) + const < 0`` when strict, else ``<= 0``."""

    coefs: frozenset  # of (var, Fraction), zero coefficients dropped
    const: Fraction
    strict: bool

    @staticmethod
    def make(coefs: Mapping[str, Fraction], const: Fraction, strict: bool) -> "_Ineq":
        coefs = {v: c for v, c in coefs.items() if c != 0}
        if coefs:
            scale = abs(coefs[min(coefs)])
            coefs = {v: c / scale for v, c in coefs.items()}
            const = const / scale
        return _Ineq(frozenset(coefs.items()), const, strict)

    def coef(self, var) -> Fraction:
        for v, c in self.coefs:
            if v == var:
                return c
        return Fraction(0)

    def trivially_ok(self) -> bool:
        return self.const < 0 if self.strict else self.const <= 0


def _ineqs_of(c: TimeConstraint, cmp: Comparator | None = None) -> list[_Ineq]:
    coefs, const = c.difference()
    cmp = c.cmp if cmp is None else cmp
    neg = {v: -x for v, x in coefs.items()}
    if cmp is Comparator.LT:
        return [_Ineq.make(coefs, const, True)]
    if cmp is Comparator.LE:
        return [_Ineq.make(coefs, const, False)]
    if cmp is Comparator.GT:
        return [_Ineq.make(neg, -const, True)]
    if cmp is Comparator.GE:
        return [_Ineq.make(neg, -const, False)]
    return [_Ineq.make(coefs, const, False), _Ineq.make(neg, -const, False)]


def _eliminate(ineqs: set, var: str) -> tuple[set, list]:
    pos, neg, rest = [], [], set()
    for q in ineqs:
        a = q.coef(var)
        if a > 0:
            pos.append(q)
        elif a < 0:
            neg.append(q)
        else:
            rest.add(q)
    for p in pos:
        ap = p.coef(var)
        for n in neg:
            an = n.coef(var)
            coefs: dict[str, Fraction] = {}
            for v, c in p.coefs:
                coefs[v] = coefs.get(v, 0) - an * c
            for v, c in n.coefs:
                coefs[v] = coefs.get(v, 0) + ap * c
            coefs.pop(var, None)
            rest.add(_Ineq.make(coefs, -an * p.const + ap * n.const, p.strict or n.strict))
    return rest, pos + neg


def _fm(ineqs: Iterable[_Ineq], variables: Iterable[str]) -> dict | None:
    current = set(ineqs)
    remaining = set(variables)
    history = []
    while True:
        for q in current:
            if not q.coefs and not q.trivially_ok():
                return None
        current = {q for q in current if q.coefs}
        if not remaining:
            break

        def cost(v):
            p = sum(1 for q in current if q.coef(v) > 0)
            n = sum(1 for q in current if q.coef(v) < 0)
            return (p * n - p - n, v)

        var = min(remaining, key=cost)
        remaining.discard(var)
        current, involved = _eliminate(current, var)
        history.append((var, involved))

    values: dict[str, Fraction] = {}
    for var, involved in reversed(history):
        lo = hi = None
        lo_strict = hi_strict = False
        for q in involved:
            a = q.coef(var)
            rest = q.const + sum(c * values.get(v, Fraction(0)) for v, c in q.coefs if v != var)
            bound = -rest / a
            if a > 0:
                if hi is None or bound < hi or (bound == hi and q.strict):
                    hi, hi_strict = bound, q.strict
            else:
                if lo is None or bound > lo or (bound == lo and q.strict):
                    lo, lo_strict = bound, q.strict
        if lo is None and hi is None:
            x = Fraction(0)
        elif hi is None:
            x = lo + 1 if lo_strict else lo
        elif lo is None:
            x = hi - 1 if hi_strict else hi
        elif not lo_strict:
            x = lo
        elif not hi_strict:
            x = hi
        else:
            x = (lo + hi) / 2
        values[var] = x
    return values


def _solve_ineqs(ineqs: list, variables: Sequence[str]) -> dict | None:
    nonneg = [_Ineq.make({v: Fraction(-1)}, Fraction(0), False) for v in variables]
    values = _fm(list(ineqs) + nonneg, variables)
    if values is None:
        return None
    return {v: values.get(v, Fraction(0)) for v in sorted(variables)}


def solve_linear(system: LinSystem | Iterable[TimeConstraint]) -> tuple[bool, dict | None]:
    """Decide whether the constraints (plus ``x >= 0`` for each variable) have a
    real solution.  Returns ``(sat, witness)`` with an exact rational witness."""
    if not isinstance(system, LinSystem):
        system = LinSystem(tuple(system))
    ineqs = [q for c in system.constraints for q in _ineqs_of(c)]
    values = _solve_ineqs(ineqs, sorted(system.vars))
    if values is None:
        return False, None
    assert all(c.holds(values) for c in system.constraints), "Fourier-Motzkin witness check failed"
    return True, values


def negated_options(c: TimeConstraint) -> list[Comparator]:
    """Comparators whose disjunction is the negation of ``c``."""
    if c.cmp is Comparator.EQ:
        return [Comparator.LT, Comparator.GT]
    return [_NEGATE[c.cmp]]


def solve_literals(literals: Iterable[tuple[TimeConstraint, bool]], variables: Iterable[str] = ()) -> dict | None:
    """Satisfy constraints asserted true or false.  A false equality splits
    into ``<`` or ``>``; every combination is tried.  Returns a witness or None."""
    literals = list(literals)
    names = set(variables)
    for c, _ in literals:
        names.update(c.vars)
    names = sorted(names)
    fixed, choices = [], []
    for c, value in literals:
        if value:
            fixed.extend(_ineqs_of(c))
        else:
            choices.append([(c, op) for op in negated_options(c)])
    for combo in product(*choices):
        ineqs = fixed + [q for c, op in combo for q in _ineqs_of(c, op)]
        values = _solve_ineqs(ineqs, names)
        if values is not None:
            assert all(c.holds(values) == value for c, value in literals), "witness check failed"
            return values
    return None
