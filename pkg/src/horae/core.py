"""Abstract syntax, rule libraries and interpretations.

Every value here is immutable once built.  Statements are trees of frozen
dataclasses, so structural equality and hashing come for free; event atoms
carry the full :class:`BasicEvent` so a rule can be printed without its
library.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import DanglingReference, DuplicateId, HoraeError

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class RuleType(str, Enum):
    SHALL = "shall"
    SHOULD = "should"
    FORBID = "forbid"


class ComponentKind(str, Enum):
    OBJECT = "object"
    ACTION = "action"
    ATTRIBUTE = "attribute"
    VALUE = "value"


class Comparator(str, Enum):
    LT = "<"
    GT = ">"
    LE = "<="
    GE = ">="
    EQ = "="

    def holds(self, diff) -> bool:
        """Compare ``lhs - rhs`` (given as ``diff``) against zero."""
        if self is Comparator.LT:
            return diff < 0
        if self is Comparator.GT:
            return diff > 0
        if self is Comparator.LE:
            return diff <= 0
        if self is Comparator.GE:
            return diff >= 0
        return diff == 0

    @property
    def symbol(self) -> str:
        return {"<=": "≤", ">=": "≥"}.get(self.value, self.value)


class EventPattern(str, Enum):
    OBJ_ACT = "obj-act"
    OBJ_ACT_OBJ = "obj-act-obj"
    OBJ_ATTR_CMP_VAL = "obj-attr-cmp-val"
    ACT_OBJ = "act-obj"
    ACT_ATTR_CMP_VAL = "act-attr-cmp-val"
    OTHER = "other"

    @property
    def has_comparator(self) -> bool:
        return self in (EventPattern.OBJ_ATTR_CMP_VAL, EventPattern.ACT_ATTR_CMP_VAL)


_O, _A, _T, _V = ComponentKind.OBJECT, ComponentKind.ACTION, ComponentKind.ATTRIBUTE, ComponentKind.VALUE
_PLAIN_PATTERNS = {
    (_O, _A): EventPattern.OBJ_ACT,
    (_O, _A, _O): EventPattern.OBJ_ACT_OBJ,
    (_A, _O): EventPattern.ACT_OBJ,
}
_CMP_PATTERNS = {
    (_O, _T, _V): EventPattern.OBJ_ATTR_CMP_VAL,
    (_A, _T, _V): EventPattern.ACT_ATTR_CMP_VAL,
}


def classify_pattern(items: Sequence[Union[ComponentKind, Comparator]]) -> EventPattern:
    """Map an ordered sequence of component kinds (with at most one comparator
    in between) to its event pattern.  Total: unknown shapes give ``OTHER``."""
    items = tuple(items)
    cmps = [i for i, x in enumerate(items) if isinstance(x, Comparator)]
    if not cmps:
        return _PLAIN_PATTERNS.get(items, EventPattern.OTHER)
    if len(cmps) == 1 and cmps[0] == 2 and len(items) == 4:
        return _CMP_PATTERNS.get(items[:2] + items[3:], EventPattern.OTHER)
    return EventPattern.OTHER


def normalize_text(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class EventComponent:
    kind: ComponentKind
    text: str

    def __post_init__(self):
        object.__setattr__(self, "kind", ComponentKind(self.kind))
        text = normalize_text(self.text)
        if not text:
            raise ValueError("event component text must be non-empty")
        object.__setattr__(self, "text", text)


@dataclass(frozen=True)
class BasicEvent:
    """A natural-language event.  When ``comparator`` is set it sits between
    the last two components, e.g. ``object attribute <= value``."""

    id: str
    components: tuple = ()
    comparator: Comparator | None = None
    raw_text: str | None = field(default=None, compare=False)

    def __post_init__(self):
        comps = tuple(c if isinstance(c, EventComponent) else EventComponent(*c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if self.comparator is not None:
            object.__setattr__(self, "comparator", Comparator(self.comparator))
            if len(comps) < 2:
                raise ValueError("a comparator needs a component on each side")

    @property
    def kinds(self) -> tuple:
        kinds = [c.kind for c in self.components]
        if self.comparator is not None:
            kinds.insert(len(kinds) - 1, self.comparator)
        return tuple(kinds)

    @property
    def pattern(self) -> EventPattern:
        return classify_pattern(self.kinds)

    @property
    def body(self) -> tuple:
        """Identity used for syntactic de-duplication."""
        return (self.components, self.comparator)

    @property
    def text(self) -> str:
        if self.raw_text:
            return self.raw_text
        if not self.components:
            return self.id
        parts = [c.text for c in self.components]
        if self.comparator is not None:
            parts.insert(len(parts) - 1, self.comparator.symbol)
        return " ".join(parts)


def _fraction(x) -> Fraction:
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"non-finite coefficient {x}")
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class LinearExpr:
    """``sum(coef * var) + constant`` with exact rational coefficients."""

    terms: tuple = ()
    constant: Fraction = Fraction(0)

    def __post_init__(self):
        merged: dict[str, Fraction] = {}
        for coef, var in self.terms:
            if not IDENT_RE.match(var):
                raise ValueError(f"bad timestamp name {var!r}")
            merged[var] = merged.get(var, Fraction(0)) + _fraction(coef)
        object.__setattr__(self, "terms", tuple((c, v) for v, c in merged.items()))
        object.__setattr__(self, "constant", _fraction(self.constant))

    @property
    def vars(self) -> tuple:
        return tuple(v for _, v in self.terms)

    def coefficients(self) -> dict:
        return {v: c for c, v in self.terms}

    def evaluate(self, values: Mapping[str, object]) -> Fraction:
        return sum((c * _fraction(values[v]) for c, v in self.terms), self.constant)


@dataclass(frozen=True)
class TimeConstraint:
    lhs: LinearExpr
    cmp: Comparator
    rhs: LinearExpr

    def __post_init__(self):
        object.__setattr__(self, "cmp", Comparator(self.cmp))

    @property
    def vars(self) -> tuple:
        return tuple(dict.fromkeys(self.lhs.vars + self.rhs.vars))

    def difference(self) -> tuple[dict, Fraction]:
        """``lhs - rhs`` as (coefficients, constant)."""
        coefs = dict(self.lhs.coefficients())
        for v, c in self.rhs.coefficients().items():
            coefs[v] = coefs.get(v, Fraction(0)) - c
        return coefs, self.lhs.constant - self.rhs.constant

    def holds(self, values: Mapping[str, object]) -> bool:
        return self.cmp.holds(self.lhs.evaluate(values) - self.rhs.evaluate(values))


class Statement:
    """Base class of statement nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Not(Statement):
    child: Statement


@dataclass(frozen=True)
class And(Statement):
    left: Statement
    right: Statement


@dataclass(frozen=True)
class Or(Statement):
    left: Statement
    right: Statement


@dataclass(frozen=True)
class Implies(Statement):
    left: Statement
    right: Statement


@dataclass(frozen=True)
class EventAtom(Statement):
    event: BasicEvent
    timestamp: str | None = None

    @property
    def event_id(self) -> str:
        return self.event.id


@dataclass(frozen=True)
class ConstraintAtom(Statement):
    constraint: TimeConstraint


BINARY = (And, Or, Implies)


def children(node: Statement) -> tuple:
    if isinstance(node, Not):
        return (node.child,)
    if isinstance(node, BINARY):
        return (node.left, node.right)
    return ()


def walk(node: Statement) -> Iterator[Statement]:
    """Pre-order traversal, left to right."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def statement_events(node: Statement) -> dict:
    """Events in first-occurrence order, keyed by id."""
    out: dict[str, BasicEvent] = {}
    for n in walk(node):
        if isinstance(n, EventAtom):
            out.setdefault(n.event.id, n.event)
    return out


def statement_timestamps(node: Statement) -> list:
    seen: dict[str, None] = {}
    for n in walk(node):
        if isinstance(n, EventAtom) and n.timestamp is not None:
            seen.setdefault(n.timestamp)
        elif isinstance(n, ConstraintAtom):
            for v in n.constraint.vars:
                seen.setdefault(v)
    return list(seen)


def conjoin(statements: Iterable[Statement]) -> Statement | None:
    result = None
    for s in statements:
        result = s if result is None else And(result, s)
    return result


@dataclass(frozen=True)
class Rule:
    id: str
    rule_type: RuleType
    statement: Statement

    def __post_init__(self):
        object.__setattr__(self, "rule_type", RuleType(self.rule_type))


@dataclass(frozen=True)
class RuleLibrary:
    rules: tuple
    events: Mapping[str, BasicEvent]
    timestamps: tuple

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def subset(self, rule_ids: Iterable[str]) -> "RuleLibrary":
        keep = set(rule_ids)
        return new_library([r for r in self.rules if r.id in keep])


def new_library(rules: Iterable[Rule], events: Mapping[str, BasicEvent] | Iterable[BasicEvent] | None = None,
                timestamps: Iterable[str] | None = None) -> RuleLibrary:
    """Validate and build a library.

    Without explicit tables, they are collected from the rules in
    first-occurrence order.  Explicit tables must cover exactly the ids and
    names the rules reference.
    """
    rules = tuple(rules)
    seen_rules: set[str] = set()
    used_events: dict[str, BasicEvent] = {}
    used_ts: dict[str, None] = {}
    for r in rules:
        if r.id in seen_rules:
            raise DuplicateId(r.id, "rule id")
        seen_rules.add(r.id)
        for node in walk(r.statement):
            if isinstance(node, EventAtom):
                prior = used_events.setdefault(node.event.id, node.event)
                if prior != node.event:
                    raise DuplicateId(node.event.id, "event id")
        for t in statement_timestamps(r.statement):
            used_ts.setdefault(t)
    for t in used_ts:
        if not IDENT_RE.match(t):
            raise ValueError(f"bad timestamp name {t!r}")

    if events is None:
        table = used_events
    else:
        items = events.values() if isinstance(events, Mapping) else events
        table = {}
        for ev in items:
            if ev.id in table:
                raise DuplicateId(ev.id, "event id")
            table[ev.id] = ev
        for eid, ev in used_events.items():
            if eid not in table:
                raise DanglingReference(eid)
            if table[eid] != ev:
                raise DuplicateId(eid, "event id")
        extra = set(table) - set(used_events)
        if extra:
            raise HoraeError(f"unreferenced events in table: {sorted(extra)}")

    if timestamps is None:
        ts = tuple(used_ts)
    else:
        ts = tuple(dict.fromkeys(timestamps))
        for t in used_ts:
            if t not in ts:
                raise DanglingReference(t)
        extra = set(ts) - set(used_ts)
        if extra:
            raise HoraeError(f"unreferenced timestamps in table: {sorted(extra)}")
    return RuleLibrary(rules, dict(table), ts)


def _check_times(time_vals: Mapping[str, object]) -> dict:
    out = {}
    for name, v in time_vals.items():
        if isinstance(v, bool) or not isinstance(v, (int, float, Fraction)):
            raise ValueError(f"timestamp {name!r} must be a real number")
        if isinstance(v, float) and not math.isfinite(v):
            raise ValueError(f"timestamp {name!r} must be finite")
        if v < 0:
            raise ValueError(f"timestamp {name!r} must be non-negative, got {v}")
        out[name] = v
    return out


@dataclass(frozen=True)
class QualInterpretation:
    event_vals: Mapping[str, bool]
    time_vals: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "event_vals", {k: bool(v) for k, v in self.event_vals.items()})
        object.__setattr__(self, "time_vals", _check_times(self.time_vals))


@dataclass(frozen=True)
class QuantInterpretation:
    event_probs: Mapping[str, float]
    time_vals: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        probs = {}
        for k, p in self.event_probs.items():
            if isinstance(p, bool) or not isinstance(p, (int, float, Fraction)):
                raise ValueError(f"probability of {k!r} must be a number")
            if not 0 <= p <= 1:
                raise ValueError(f"probability of {k!r} outside [0, 1]: {p}")
            probs[k] = float(p)
        object.__setattr__(self, "event_probs", probs)
        object.__setattr__(self, "time_vals", _check_times(self.time_vals))


# JSON-friendly views -------------------------------------------------------

def _num(x: Fraction):
    return int(x) if x.denominator == 1 else str(x)


def expr_to_dict(e: LinearExpr) -> dict:
    return {"terms": [[_num(c), v] for c, v in e.terms], "constant": _num(e.constant)}


def event_to_dict(ev: BasicEvent) -> dict:
    d = {
        "id": ev.id,
        "pattern": ev.pattern.value,
        "components": [{"kind": c.kind.value, "text": c.text} for c in ev.components],
    }
    if ev.comparator is not None:
        d["comparator"] = ev.comparator.value
    return d


def statement_to_dict(s: Statement) -> dict:
    if isinstance(s, EventAtom):
        d = {"node": "event", "event": s.event.id}
        if s.timestamp is not None:
            d["timestamp"] = s.timestamp
        return d
    if isinstance(s, ConstraintAtom):
        c = s.constraint
        return {"node": "constraint", "lhs": expr_to_dict(c.lhs), "cmp": c.cmp.value, "rhs": expr_to_dict(c.rhs)}
    if isinstance(s, Not):
        return {"node": "not", "child": statement_to_dict(s.child)}
    name = {And: "and", Or: "or", Implies: "implies"}[type(s)]
    return {"node": name, "left": statement_to_dict(s.left), "right": statement_to_dict(s.right)}


def library_to_dict(lib: RuleLibrary) -> dict:
    return {
        "rules": [{"id": r.id, "type": r.rule_type.value, "statement": statement_to_dict(r.statement)} for r in lib.rules],
        "events": [event_to_dict(ev) for ev in lib.events.values()],
        "timestamps": list(lib.timestamps),
    }
