"""Qualitative and quantitative meaning of statements.

``pr_statement`` is the recursive independence calculus over a statement
tree; ``pr_exact`` is a brute-force weighted model count used to check it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .core import (And, ConstraintAtom, EventAtom, Implies, Not, Or, QualInterpretation, QuantInterpretation,
                   RuleLibrary, Statement, statement_events, statement_timestamps)
from .errors import FormulaTooLarge, PartialInterpretation, TooManyEvents

DEFAULT_CLAUSE_BUDGET = 100_000
EQUIVALENCE_CAP = 16
EXACT_CAP = 20


# desugaring ----------------------------------------------------------------

def desugar(s: Statement) -> Statement:
    """Rewrite ``|`` and ``->`` into ``!`` and ``&``."""
    if isinstance(s, Not):
        return Not(desugar(s.child))
    if isinstance(s, And):
        return And(desugar(s.left), desugar(s.right))
    if isinstance(s, Or):
        return Not(And(Not(desugar(s.left)), Not(desugar(s.right))))
    if isinstance(s, Implies):
        return Not(And(desugar(s.left), Not(desugar(s.right))))
    return s


# CNF ------------------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    atom: Statement  # EventAtom or ConstraintAtom
    negated: bool = False

    @property
    def key(self):
        """Propositional identity: events by id, constraints structurally."""
        if isinstance(self.atom, EventAtom):
            return ("e", self.atom.event.id)
        return ("c", self.atom.constraint)

    def __neg__(self) -> "Literal":
        return Literal(self.atom, not self.negated)


@dataclass(frozen=True)
class CnfForm:
    """Conjunction of clauses.  ``()`` is true; ``((),)`` is false."""

    clauses: tuple

    @property
    def is_true(self) -> bool:
        return not self.clauses

    @property
    def is_false(self) -> bool:
        return any(not c for c in self.clauses)

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)


def _merge(a: tuple, b: tuple):
    seen = {}
    for lit in a + b:
        prior = seen.get(lit.key)
        if prior is None:
            seen[lit.key] = lit
        elif prior.negated != lit.negated:
            return None  # tautology
    return tuple(seen.values())


def to_cnf(s: Statement, budget: int = DEFAULT_CLAUSE_BUDGET) -> CnfForm:
    """Equivalent CNF by pushing negations inward and distributing ``|`` over
    ``&``.  No auxiliary variables.  Raises :class:`FormulaTooLarge` when the
    clause count would exceed ``budget``."""

    def check(n):
        if n > budget:
            raise FormulaTooLarge(f"CNF needs more than {budget} clauses")

    def conj(a, b):
        check(len(a) + len(b))
        return a + b

    def disj(a, b):
        check(len(a) * len(b))
        out = []
        for ca in a:
            for cb in b:
                merged = _merge(ca, cb)
                if merged is not None:
                    out.append(merged)
        return out

    def go(node, positive):
        if isinstance(node, (EventAtom, ConstraintAtom)):
            return [(Literal(node, not positive),)]
        if isinstance(node, Not):
            return go(node.child, not positive)
        if isinstance(node, And):
            l, r = go(node.left, positive), go(node.right, positive)
            return conj(l, r) if positive else disj(l, r)
        if isinstance(node, Or):
            l, r = go(node.left, positive), go(node.right, positive)
            return disj(l, r) if positive else conj(l, r)
        if isinstance(node, Implies):
            l, r = go(node.left, not positive), go(node.right, positive)
            return disj(l, r) if positive else conj(l, r)
        raise TypeError(f"not a statement: {node!r}")

    clauses = go(s, True)
    if any(not c for c in clauses):
        return CnfForm(((),))
    return CnfForm(tuple(clauses))


def cnf_holds(cnf: CnfForm, event_vals: Mapping[str, bool], time_vals: Mapping) -> bool:
    def lit_value(lit):
        a = lit.atom
        v = event_vals[a.event.id] if isinstance(a, EventAtom) else a.constraint.holds(time_vals)
        return v != lit.negated

    return all(any(lit_value(l) for l in clause) for clause in cnf.clauses)


# qualitative evaluation ----------------------------------------------------

@dataclass(frozen=True)
class _Const(Statement):
    value: bool


def _missing(statements: Iterable[Statement], events: Mapping, times: Mapping, extra_events=(), extra_ts=()):
    need_e, need_t = set(extra_events), set(extra_ts)
    for s in statements:
        need_e.update(statement_events(s))
        need_t.update(statement_timestamps(s))
    missing = [e for e in need_e if e not in events] + [t for t in need_t if t not in times]
    if missing:
        raise PartialInterpretation(missing)


def truth(s: Statement, event_vals: Mapping[str, bool], time_vals: Mapping) -> bool:
    if isinstance(s, EventAtom):
        return bool(event_vals[s.event.id])
    if isinstance(s, ConstraintAtom):
        return s.constraint.holds(time_vals)
    if isinstance(s, Not):
        return not truth(s.child, event_vals, time_vals)
    if isinstance(s, And):
        return truth(s.left, event_vals, time_vals) and truth(s.right, event_vals, time_vals)
    if isinstance(s, Or):
        return truth(s.left, event_vals, time_vals) or truth(s.right, event_vals, time_vals)
    if isinstance(s, Implies):
        return (not truth(s.left, event_vals, time_vals)) or truth(s.right, event_vals, time_vals)
    if isinstance(s, _Const):
        return s.value
    raise TypeError(f"not a statement: {s!r}")


def eval_statement(s: Statement, i: QualInterpretation) -> bool:
    _missing([s], i.event_vals, i.time_vals)
    return truth(s, i.event_vals, i.time_vals)


def eval_qualitative(lib: RuleLibrary, i: QualInterpretation) -> bool:
    """True iff every statement of ``lib`` holds under ``i``."""
    _missing([], i.event_vals, i.time_vals, lib.events, lib.timestamps)
    return all(truth(r.statement, i.event_vals, i.time_vals) for r in lib.rules)


# quantitative semantics ----------------------------------------------------

def resolve_constraints(s: Statement, time_vals: Mapping) -> Statement:
    """Replace every constraint atom by its truth value under ``time_vals``."""
    if isinstance(s, ConstraintAtom):
        return _Const(s.constraint.holds(time_vals))
    if isinstance(s, Not):
        return Not(resolve_constraints(s.child, time_vals))
    if isinstance(s, (And, Or, Implies)):
        return type(s)(resolve_constraints(s.left, time_vals), resolve_constraints(s.right, time_vals))
    return s


def _columns(n: int) -> list[int]:
    """Truth-table columns as bitsets over the 2**n assignments; bit ``a`` of
    column ``j`` is bit ``j`` of ``a``."""
    size = 1 << n
    cols = []
    for j in range(n):
        block = 1 << j
        unit = ((1 << block) - 1) << block  # `block` zeros then `block` ones
        period = 2 * block
        col = 0
        for start in range(0, size, period):
            col |= unit << start
        cols.append(col)
    return cols


def pr_statement(s: Statement, i: QuantInterpretation, cap: int = EQUIVALENCE_CAP) -> float:
    """Probability that ``s`` holds, by the recursive independence rules.

    Constraint atoms are settled by the (deterministic) timestamps first.  At
    every node, a sub-statement equivalent to true/false gets 1/0 before the
    structural rules apply; equivalence is decided by truth table when the
    statement has at most ``cap`` events, otherwise only constants count.
    """
    _missing([s], i.event_probs, i.time_vals)
    node = resolve_constraints(s, i.time_vals)
    ids = list(statement_events(node))
    probs = i.event_probs
    if len(ids) <= cap:
        full = (1 << (1 << len(ids))) - 1
        column = dict(zip(ids, _columns(len(ids))))
    else:
        full, column = None, None

    def go(n):
        # returns (probability, truth-table bitset or None)
        if isinstance(n, _Const):
            return (1.0 if n.value else 0.0), (full if n.value else 0) if full is not None else None
        if isinstance(n, EventAtom):
            p = probs[n.event.id]
            mask = column[n.event.id] if column is not None else None
        elif isinstance(n, Not):
            pc, mc = go(n.child)
            p = 1.0 - pc
            mask = full ^ mc if mc is not None else None
        else:
            (pl, ml), (pr, mr) = go(n.left), go(n.right)
            if isinstance(n, And):
                p = pl * pr
                mask = ml & mr if ml is not None else None
            elif isinstance(n, Or):
                p = 1.0 - (1.0 - pl) * (1.0 - pr)
                mask = ml | mr if ml is not None else None
            elif isinstance(n, Implies):
                p = 1.0 - pl * (1.0 - pr)
                mask = (full ^ ml) | mr if ml is not None else None
            else:
                raise TypeError(f"not a statement: {n!r}")
        if mask is not None:
            if mask == full:
                return 1.0, mask
            if mask == 0:
                return 0.0, mask
        return min(1.0, max(0.0, p)), mask

    return go(node)[0]


def pr_library(lib: RuleLibrary, i: QuantInterpretation, cap: int = EQUIVALENCE_CAP) -> float:
    """Product of per-statement probabilities (statements treated as independent)."""
    _missing([], i.event_probs, i.time_vals, lib.events, lib.timestamps)
    result = 1.0
    for r in lib.rules:
        result *= pr_statement(r.statement, i, cap)
    return result


def _truth_vector(s: Statement, cols: Mapping[str, np.ndarray], time_vals, size: int) -> np.ndarray:
    if isinstance(s, EventAtom):
        return cols[s.event.id]
    if isinstance(s, ConstraintAtom):
        return np.full(size, s.constraint.holds(time_vals))
    if isinstance(s, Not):
        return ~_truth_vector(s.child, cols, time_vals, size)
    l = _truth_vector(s.left, cols, time_vals, size)
    r = _truth_vector(s.right, cols, time_vals, size)
    if isinstance(s, And):
        return l & r
    if isinstance(s, Or):
        return l | r
    if isinstance(s, Implies):
        return ~l | r
    raise TypeError(f"not a statement: {s!r}")


def pr_exact(s: Statement, i: QuantInterpretation, max_events: int = EXACT_CAP) -> float:
    """Sum over every event assignment of its product weight times the
    indicator that ``s`` holds; events are independent Bernoulli variables."""
    _missing([s], i.event_probs, i.time_vals)
    ids = list(statement_events(s))
    n = len(ids)
    if n > max_events:
        raise TooManyEvents(f"{n} events exceed the enumeration limit of {max_events}")
    size = 1 << n
    bits = (np.arange(size, dtype=np.int64)[:, None] >> np.arange(n)) & 1
    bits = bits.astype(bool)
    p = np.array([i.event_probs[e] for e in ids], dtype=float)
    weights = np.prod(np.where(bits, p, 1.0 - p), axis=1) if n else np.ones(1)
    cols = {e: bits[:, j] for j, e in enumerate(ids)}
    holds = _truth_vector(s, cols, i.time_vals, size)
    return float(weights[holds].sum())
