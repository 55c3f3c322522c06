"""Reference implementations written without the package's solver code.

Truth is computed by direct recursion, probabilities by enumerating every
event assignment with exact fractions, and feasibility of timing literals
with scipy's LP solver (maximizing a shared slack for strict inequalities).
"""
from fractions import Fraction
from itertools import product

import numpy as np
from scipy.optimize import linprog

from horae.core import And, Comparator, ConstraintAtom, EventAtom, Implies, Not, Or, walk

STRICT_EPS = 1e-7


def truth(s, ev, atoms):
    """``atoms`` maps constraint -> bool (already decided)."""
    if isinstance(s, EventAtom):
        return ev[s.event.id]
    if isinstance(s, ConstraintAtom):
        return atoms[s.constraint]
    if isinstance(s, Not):
        return not truth(s.child, ev, atoms)
    l, r = truth(s.left, ev, atoms), truth(s.right, ev, atoms)
    if isinstance(s, And):
        return l and r
    if isinstance(s, Or):
        return l or r
    assert isinstance(s, Implies)
    return (not l) or r


def constraint_value(c, times) -> bool:
    diff = sum((Fraction(k) * Fraction(times[v]) for k, v in c.lhs.terms), Fraction(c.lhs.constant))
    diff -= sum((Fraction(k) * Fraction(times[v]) for k, v in c.rhs.terms), Fraction(c.rhs.constant))
    return {Comparator.LT: diff < 0, Comparator.GT: diff > 0, Comparator.LE: diff <= 0,
            Comparator.GE: diff >= 0, Comparator.EQ: diff == 0}[c.cmp]


def _rows(c, value):
    """(coef dict, const, strict) rows meaning ``coef.x + const (<|<=) 0``."""
    coef = {}
    for k, v in c.lhs.terms:
        coef[v] = coef.get(v, 0) + float(k)
    for k, v in c.rhs.terms:
        coef[v] = coef.get(v, 0) - float(k)
    const = float(c.lhs.constant - c.rhs.constant)
    neg = {v: -x for v, x in coef.items()}
    cmp = c.cmp
    if value:
        table = {Comparator.LT: [(coef, const, True)], Comparator.LE: [(coef, const, False)],
                 Comparator.GT: [(neg, -const, True)], Comparator.GE: [(neg, -const, False)],
                 Comparator.EQ: [(coef, const, False), (neg, -const, False)]}
        return [table[cmp]]
    table = {Comparator.LT: [[(neg, -const, False)]], Comparator.LE: [[(neg, -const, True)]],
             Comparator.GT: [[(coef, const, False)]], Comparator.GE: [[(coef, const, True)]],
             Comparator.EQ: [[(coef, const, True)], [(neg, -const, True)]]}
    return table[cmp]  # list of alternatives


def _lp_feasible(rows, names) -> bool:
    if not names:
        return all((c < -STRICT_EPS) if strict else (c <= 1e-9) for _, c, strict in rows)
    idx = {v: i for i, v in enumerate(names)}
    n = len(names)
    a_ub, b_ub = [], []
    for coef, const, strict in rows:
        row = np.zeros(n + 1)
        for v, x in coef.items():
            row[idx[v]] += x
        row[n] = 1.0 if strict else 0.0
        a_ub.append(row)
        b_ub.append(-const)
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    bounds = [(0, None)] * n + [(0, 1)]
    res = linprog(cost, A_ub=np.array(a_ub) if a_ub else None, b_ub=np.array(b_ub) if b_ub else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return False
    has_strict = any(strict for _, _, strict in rows)
    return (not has_strict) or res.x[n] > STRICT_EPS


def literals_feasible(literals, names) -> bool:
    """Do timestamps >= 0 exist making each (constraint, value) hold?"""
    fixed, choices = [], []
    for c, value in literals:
        alts = _rows(c, value)
        if len(alts) == 1:
            fixed.extend(alts[0])
        else:
            choices.append(alts)
    for combo in product(*choices):
        rows = fixed + [r for alt in combo for r in alt]
        if _lp_feasible(rows, names):
            return True
    return False


def constraints_of(statements):
    seen = {}
    for s in statements:
        for n in walk(s):
            if isinstance(n, ConstraintAtom):
                seen.setdefault(n.constraint)
    return list(seen)


def brute_qualitative(lib) -> bool:
    """2^n event assignments x truth assignments to constraint atoms, each checked by LP."""
    statements = [r.statement for r in lib.rules]
    cons = constraints_of(statements)
    names = sorted(lib.timestamps)
    eids = list(lib.events)
    feasible = {}
    for alpha in product([False, True], repeat=len(cons)):
        atoms = dict(zip(cons, alpha))
        for bits in product([False, True], repeat=len(eids)):
            ev = dict(zip(eids, bits))
            if all(truth(s, ev, atoms) for s in statements):
                if alpha not in feasible:
                    feasible[alpha] = literals_feasible(list(zip(cons, alpha)), names)
                if feasible[alpha]:
                    return True
                break
    return False


def brute_quantitative(lib) -> bool:
    """Some feasible constraint assignment under which each statement alone is satisfiable."""
    statements = [r.statement for r in lib.rules]
    cons = constraints_of(statements)
    names = sorted(lib.timestamps)
    eids = list(lib.events)
    for alpha in product([False, True], repeat=len(cons)):
        atoms = dict(zip(cons, alpha))
        ok = all(any(truth(s, dict(zip(eids, bits)), atoms) for bits in product([False, True], repeat=len(eids)))
                 for s in statements)
        if ok and literals_feasible(list(zip(cons, alpha)), names):
            return True
    return False


def exact_probability(s, probs, times) -> Fraction:
    """Sum of weights of satisfying assignments, in exact fractions."""
    eids = [n.event.id for n in walk(s) if isinstance(n, EventAtom)]
    eids = list(dict.fromkeys(eids))
    atoms = {c: constraint_value(c, times) for c in constraints_of([s])}
    total = Fraction(0)
    for bits in product([False, True], repeat=len(eids)):
        ev = dict(zip(eids, bits))
        if truth(s, ev, atoms):
            w = Fraction(1)
            for e, b in ev.items():
                p = Fraction(probs[e])
                w *= p if b else 1 - p
            total += w
    return total
