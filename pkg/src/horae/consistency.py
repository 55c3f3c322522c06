"""Consistency checking of rule libraries.

Qualitative: is there one boolean/timestamp interpretation under which every
statement holds?  Decided by DPLL over event and constraint atoms, with each
propositional model's constraint literals handed to Fourier-Motzkin; theory
conflicts come back as blocking clauses.

Quantitative: is there a probabilistic interpretation giving the product of
statement probabilities a positive value?  Statements are independent under
that product, and a statement's probability is positive at p = 1/2 exactly
when it is satisfiable once its constraint atoms are fixed by the timestamps.
So the check searches for a feasible truth assignment to the constraint atoms
under which every statement, taken alone, is satisfiable.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .core import (And, ConstraintAtom, EventAtom, Implies, LinearExpr, Not, Or, QualInterpretation,
                   QuantInterpretation, RuleLibrary, Statement, TimeConstraint, library_to_dict)
from .errors import ClauseBudgetExceeded, FormulaTooLarge
from .linear import solve_literals
from .semantics import DEFAULT_CLAUSE_BUDGET, to_cnf


class Verdict(str, Enum):
    CONSISTENT = "Consistent"
    INCONSISTENT = "Inconsistent"


class Mode(str, Enum):
    QUALITATIVE = "Qualitative"
    QUANTITATIVE = "Quantitative"


@dataclass(frozen=True)
class ConsistencyReport:
    verdict: Verdict
    mode: Mode
    witness: QualInterpretation | QuantInterpretation | None = None
    conflict_core: tuple | None = None
    rule_types: dict | None = None

    @property
    def consistent(self) -> bool:
        return self.verdict is Verdict.CONSISTENT

    def to_dict(self) -> dict:
        d = {"verdict": self.verdict.value, "mode": self.mode.value, "rule_types": self.rule_types or {}}
        if self.witness is not None:
            events = (self.witness.event_vals if isinstance(self.witness, QualInterpretation)
                      else self.witness.event_probs)
            d["witness"] = {
                "events": dict(events),
                "timestamps": {k: _json_num(v) for k, v in self.witness.time_vals.items()},
            }
        if self.conflict_core is not None:
            d["conflict_core"] = list(self.conflict_core)
        return d


def _json_num(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    return v


# DPLL -----------------------------------------------------------------------

def dpll(clauses, assumptions=None) -> dict | None:
    """Find a (possibly partial) assignment satisfying integer-literal clauses.

    Unit propagation plus chronological backtracking.  Variables left
    unassigned do not affect satisfaction.
    """
    clauses = [tuple(c) for c in clauses]
    return _dpll(clauses, dict(assumptions or {}))


def _propagate(clauses, assignment):
    while True:
        changed = False
        for clause in clauses:
            free = None
            n_free = 0
            for lit in clause:
                v = assignment.get(abs(lit))
                if v is None:
                    free = lit
                    n_free += 1
                elif v == (lit > 0):
                    break
            else:
                if n_free == 0:
                    return False
                if n_free == 1:
                    assignment[abs(free)] = free > 0
                    changed = True
        if not changed:
            return True


def _dpll(clauses, assignment):
    if not _propagate(clauses, assignment):
        return None
    branch = None
    for clause in clauses:
        if not any(assignment.get(abs(l)) == (l > 0) for l in clause):
            branch = next(l for l in clause if abs(l) not in assignment)
            break
    if branch is None:
        return assignment
    for value in (branch > 0, branch < 0):
        trial = dict(assignment)
        trial[abs(branch)] = value
        found = _dpll(clauses, trial)
        if found is not None:
            return found
    return None


# encoding -------------------------------------------------------------------

class _Encoding:
    """Maps literal keys to DPLL variables: events first, then constraints."""

    def __init__(self, lib: RuleLibrary, budget: int):
        self.lib = lib
        self.var: dict = {}
        self.constraints: dict[int, TimeConstraint] = {}
        for eid in lib.events:
            self._var(("e", eid))
        self.statement_clauses = []
        for r in lib.rules:
            try:
                cnf = to_cnf(r.statement, budget)
            except FormulaTooLarge as exc:
                raise ClauseBudgetExceeded(f"rule {r.id}: {exc}") from None
            clauses = []
            for clause in cnf.clauses:
                ints = []
                for lit in clause:
                    v = self._var(lit.key)
                    if lit.key[0] == "c":
                        self.constraints[v] = lit.key[1]
                    ints.append(-v if lit.negated else v)
                clauses.append(tuple(ints))
            self.statement_clauses.append(clauses)

    def _var(self, key) -> int:
        if key not in self.var:
            self.var[key] = len(self.var) + 1
        return self.var[key]

    def event_value(self, model: dict, eid: str) -> bool:
        return bool(model.get(self.var[("e", eid)], False))


def _theory_literals(enc: _Encoding, model: dict) -> list:
    return [(v, enc.constraints[v], model[v]) for v in sorted(enc.constraints) if v in model]


def _shrink(lits: list, timestamps) -> list:
    core = list(lits)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if solve_literals([(c, val) for _, c, val in trial], timestamps) is None:
            core = trial
        else:
            i += 1
    return core


def _abstracted(lib, abstraction):
    if abstraction is None:
        return lib
    from .abstraction import apply_abstraction
    return apply_abstraction(lib, abstraction)


def _lift_events(lib, abstraction, rep_value) -> dict:
    """Event values of the original library from representative values."""
    out = {}
    for eid in lib.events:
        if abstraction is None:
            out[eid] = rep_value(eid)
        else:
            rep, pol = abstraction.class_of[eid]
            out[eid] = rep_value(rep) if pol > 0 else not rep_value(rep)
    return out


def _qualitative_model(lib: RuleLibrary, budget: int):
    enc = _Encoding(lib, budget)
    clauses = [c for cs in enc.statement_clauses for c in cs]
    while True:
        model = dpll(clauses)
        if model is None:
            return None
        lits = _theory_literals(enc, model)
        times = solve_literals([(c, val) for _, c, val in lits], lib.timestamps)
        if times is not None:
            return enc, model, times
        core = _shrink(lits, lib.timestamps)
        clauses.append(tuple(-v if val else v for v, _, val in core))


def _greedy_core(lib: RuleLibrary, inconsistent) -> tuple:
    keep = [r.id for r in lib.rules]
    for rid in [r.id for r in lib.rules]:
        trial = [k for k in keep if k != rid]
        if inconsistent(lib.subset(trial)):
            keep = trial
    return tuple(keep)


def _rule_types(lib):
    return {r.id: r.rule_type.value for r in lib.rules}


def check_qualitative(lib: RuleLibrary, abstraction=None, budget: int = DEFAULT_CLAUSE_BUDGET) -> ConsistencyReport:
    """Decide whether one interpretation satisfies every statement at once.

    With an ``abstraction``, correlated events are merged first.  A witness
    over the original events is returned when consistent; otherwise a
    greedily shrunk set of conflicting rule ids.
    """
    work = _abstracted(lib, abstraction)
    found = _qualitative_model(work, budget)
    if found is None:
        core = _greedy_core(work, lambda sub: _qualitative_model(sub, budget) is None)
        return ConsistencyReport(Verdict.INCONSISTENT, Mode.QUALITATIVE, None, core, _rule_types(lib))
    enc, model, times = found
    events = _lift_events(lib, abstraction, lambda eid: enc.event_value(model, eid))
    times = {t: times.get(t, Fraction(0)) for t in lib.timestamps}
    witness = QualInterpretation(events, times)
    return ConsistencyReport(Verdict.CONSISTENT, Mode.QUALITATIVE, witness, None, _rule_types(lib))


def _quantitative_times(lib: RuleLibrary, budget: int):
    enc = _Encoding(lib, budget)
    atoms = sorted(enc.constraints)

    def viable(alpha):
        if solve_literals([(enc.constraints[v], val) for v, val in alpha.items()], lib.timestamps) is None:
            return False
        return all(dpll(cs, alpha) is not None for cs in enc.statement_clauses)

    def search(idx, alpha):
        if not viable(alpha):
            return None
        if idx == len(atoms):
            return alpha
        for value in (True, False):
            found = search(idx + 1, {**alpha, atoms[idx]: value})
            if found is not None:
                return found
        return None

    alpha = search(0, {})
    if alpha is None:
        return None
    return solve_literals([(enc.constraints[v], val) for v, val in alpha.items()], lib.timestamps)


def check_quantitative(lib: RuleLibrary, abstraction=None, budget: int = DEFAULT_CLAUSE_BUDGET) -> ConsistencyReport:
    """Decide whether some probabilistic interpretation makes the product of
    statement probabilities positive.  The witness gives every event
    probability 1/2 and fixes timestamps from the linear solver."""
    work = _abstracted(lib, abstraction)
    times = _quantitative_times(work, budget)
    if times is None:
        core = _greedy_core(work, lambda sub: _quantitative_times(sub, budget) is None)
        return ConsistencyReport(Verdict.INCONSISTENT, Mode.QUANTITATIVE, None, core, _rule_types(lib))
    probs = {eid: 0.5 for eid in lib.events}
    times = {t: times.get(t, Fraction(0)) for t in lib.timestamps}
    witness = QuantInterpretation(probs, times)
    return ConsistencyReport(Verdict.CONSISTENT, Mode.QUANTITATIVE, witness, None, _rule_types(lib))


# SMT-LIB --------------------------------------------------------------------

_SIMPLE_SYMBOL = re.compile(r"[A-Za-z~!@$%^&*_+=<>.?/\-][0-9A-Za-z~!@$%^&*_+=<>.?/\-]*\Z")


def _symbol(prefix: str, name: str) -> str:
    sym = f"{prefix}_{name}"
    return sym if _SIMPLE_SYMBOL.match(sym) else "|" + sym.replace("|", "_").replace("\\", "_") + "|"


def _real(x: Fraction) -> str:
    mag = abs(x)
    text = f"{mag.numerator}.0" if mag.denominator == 1 else f"(/ {mag.numerator}.0 {mag.denominator}.0)"
    return f"(- {text})" if x < 0 else text


def _smt_expr(e: LinearExpr) -> str:
    parts = []
    for c, v in e.terms:
        sym = _symbol("ts", v)
        parts.append(sym if c == 1 else f"(* {_real(c)} {sym})")
    if e.constant != 0 or not parts:
        parts.append(_real(e.constant))
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def smt_term(s: Statement) -> str:
    if isinstance(s, EventAtom):
        return _symbol("ev", s.event.id)
    if isinstance(s, ConstraintAtom):
        c = s.constraint
        return f"({c.cmp.value} {_smt_expr(c.lhs)} {_smt_expr(c.rhs)})"
    if isinstance(s, Not):
        return f"(not {smt_term(s.child)})"
    op = {And: "and", Or: "or", Implies: "=>"}[type(s)]
    return f"({op} {smt_term(s.left)} {smt_term(s.right)})"


def emit_smtlib(lib: RuleLibrary, abstraction=None) -> str:
    """SMT-LIB 2.6 script deciding qualitative consistency of ``lib``."""
    work = _abstracted(lib, abstraction)
    decls = [f"(declare-const {_symbol('ev', e)} Bool)" for e in sorted(work.events)]
    decls += [f"(declare-const {_symbol('ts', t)} Real)" for t in sorted(work.timestamps)]
    lines = []
    if decls:
        lines.append("(set-option :produce-models true)")
    lines.append("(set-logic QF_LRA)")
    lines.extend(decls)
    lines += [f"(assert (>= {_symbol('ts', t)} 0.0))" for t in sorted(work.timestamps)]
    for r in work.rules:
        lines.append(f"; {r.id} ({r.rule_type.value})")
        lines.append(f"(assert {smt_term(r.statement)})")
    lines.append("(check-sat)")
    if decls:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def report_json(lib: RuleLibrary, report: ConsistencyReport) -> dict:
    d = report.to_dict()
    d["library"] = library_to_dict(lib)
    return d
