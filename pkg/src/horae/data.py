"""SRR-Eval records, relation strings and evaluation metrics."""
from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import And, BasicEvent, ConstraintAtom, EventAtom, Not, Or, Statement
from .errors import (DegenerateAgreement, LengthMismatch, LetterOutOfRange, ParseError, RelationParseError, SchemaError,
                     UnevenRaterCounts)

ORIGINAL_RULE = "original rule"
BASIC_EVENTS = "basic events"
LOGICAL_RELATION = "logical relation"
SYNTACTIC_PATTERNS = "syntactic patterns"
MAX_EVENTS = 26


@dataclass(frozen=True)
class ValidationRecord:
    original_rule: str
    basic_events: tuple
    logical_relation: str
    syntactic_patterns: tuple

    def to_json(self) -> dict:
        return {ORIGINAL_RULE: self.original_rule, BASIC_EVENTS: list(self.basic_events),
                LOGICAL_RELATION: self.logical_relation, SYNTACTIC_PATTERNS: list(self.syntactic_patterns)}


@dataclass(frozen=True)
class CompositeRecord:
    original_rule: str
    basic_events: tuple
    logical_relation: str

    def to_json(self) -> dict:
        return {ORIGINAL_RULE: self.original_rule, BASIC_EVENTS: list(self.basic_events),
                LOGICAL_RELATION: self.logical_relation}


@dataclass(frozen=True)
class SingleEventRecord:
    basic_events: tuple
    syntactic_patterns: tuple

    def to_json(self) -> dict:
        return {BASIC_EVENTS: list(self.basic_events), SYNTACTIC_PATTERNS: list(self.syntactic_patterns)}


_SHAPES = {
    frozenset({ORIGINAL_RULE, BASIC_EVENTS, LOGICAL_RELATION, SYNTACTIC_PATTERNS}): ValidationRecord,
    frozenset({ORIGINAL_RULE, BASIC_EVENTS, LOGICAL_RELATION}): CompositeRecord,
    frozenset({BASIC_EVENTS, SYNTACTIC_PATTERNS}): SingleEventRecord,
}


def _strings(index, obj, key) -> tuple:
    value = obj[key]
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise SchemaError(index, f"{key!r} must be a list of strings")
    return tuple(value)


def _string(index, obj, key) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(index, f"{key!r} must be a string")
    return value


def parse_record(index: int, obj) -> ValidationRecord | CompositeRecord | SingleEventRecord:
    if not isinstance(obj, dict):
        raise SchemaError(index, "expected a JSON object")
    shape = _SHAPES.get(frozenset(obj))
    if shape is None:
        known = set().union(*_SHAPES)
        unknown = sorted(set(obj) - known)
        reason = f"unknown keys {unknown}" if unknown else f"key set {sorted(obj)} matches no record shape"
        raise SchemaError(index, reason)
    events = _strings(index, obj, BASIC_EVENTS)
    if SYNTACTIC_PATTERNS in obj:
        patterns = _strings(index, obj, SYNTACTIC_PATTERNS)
        if len(patterns) != len(events):
            raise LengthMismatch(index, f"{len(events)} basic events but {len(patterns)} syntactic patterns")
    if LOGICAL_RELATION in obj:
        relation = _string(index, obj, LOGICAL_RELATION)
        if len(events) > MAX_EVENTS:
            raise SchemaError(index, f"{len(events)} events exceed the A-Z relation alphabet")
        try:
            parse_relation(relation, len(events))
        except RelationParseError as exc:
            raise SchemaError(index, f"bad logical relation: {exc}") from None
    if shape is ValidationRecord:
        return ValidationRecord(_string(index, obj, ORIGINAL_RULE), events, relation, patterns)
    if shape is CompositeRecord:
        return CompositeRecord(_string(index, obj, ORIGINAL_RULE), events, relation)
    return SingleEventRecord(events, patterns)


def load_dataset(source) -> list:
    """Read a JSON array of SRR-Eval records from a path, bytes, text or a
    binary/text stream; each record is typed by its key set."""
    if isinstance(source, (str, os.PathLike)) and not str(source).lstrip().startswith(("[", "{")):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif isinstance(source, (bytes, bytearray, str)):
        raw = source
    else:
        raw = source.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(-1, f"invalid JSON: {exc}") from None
    if not isinstance(data, list):
        raise SchemaError(-1, "top level must be a JSON array")
    return [parse_record(i, obj) for i, obj in enumerate(data)]


def dump_dataset(records: Iterable, stream: io.TextIOBase | None = None) -> str:
    text = json.dumps([r.to_json() for r in records], ensure_ascii=False, indent=2)
    if stream is not None:
        stream.write(text)
    return text


# relation strings ----------------------------------------------------------------

def placeholder(letter: str) -> EventAtom:
    return EventAtom(BasicEvent(letter))


def parse_relation(rel: str, event_count: int) -> Statement:
    """Parse a letter formula such as ``"A & B & (C | D)"``.

    Letters A-Z stand for the basic events in list order.  Operators and
    precedence follow the rule language: ``!`` binds tightest, then ``&``,
    then ``|``; binary operators associate to the left.  Timing constraints
    in rule syntax (``[t1 + 2 < t2]``) may appear as atoms.
    """
    if event_count > MAX_EVENTS:
        raise RelationParseError(f"{event_count} events exceed the A-Z alphabet")
    toks = []
    i = 0
    while i < len(rel):
        ch = rel[i]
        if ch == "[":
            end = rel.find("]", i)
            if end < 0:
                raise RelationParseError("unterminated timing constraint", i)
            toks.append((_constraint(rel[i:end + 1], i), i))
            i = end + 1
            continue
        if ch in "!&|()" or "A" <= ch <= "Z":
            toks.append((ch, i))
        elif not ch.isspace():
            raise RelationParseError(f"unexpected character {ch!r}", i)
        i += 1
    toks.append(("", len(rel)))
    pos = 0

    def peek():
        tok = toks[pos][0]
        return tok if isinstance(tok, str) else "["

    def take():
        nonlocal pos
        tok = toks[pos]
        pos += 1
        return tok

    def disjunction():
        node = conjunction()
        while peek() == "|":
            take()
            node = Or(node, conjunction())
        return node

    def conjunction():
        node = negation()
        while peek() == "&":
            take()
            node = And(node, negation())
        return node

    def negation():
        if peek() == "!":
            take()
            return Not(negation())
        return atom()

    def atom():
        ch, at = take()
        if isinstance(ch, ConstraintAtom):
            return ch
        if ch == "(":
            node = disjunction()
            if peek() != ")":
                raise RelationParseError("expected ')'", toks[pos][1])
            take()
            return node
        if ch and "A" <= ch <= "Z":
            if ord(ch) - ord("A") >= event_count:
                raise LetterOutOfRange(ch, event_count)
            if "A" <= peek() <= "Z" and peek():
                raise RelationParseError("adjacent letters need an operator", toks[pos][1])
            return placeholder(ch)
        raise RelationParseError("expected a letter, '!' or '('" if ch else "unexpected end of relation", at)

    node = disjunction()
    if peek():
        raise RelationParseError(f"unexpected {peek()!r}", toks[pos][1])
    return node


def _constraint(text: str, at: int) -> ConstraintAtom:
    from .parser import parse_rule
    try:
        node = parse_rule("shall " + text).statement
    except ParseError as exc:
        raise RelationParseError(f"bad timing constraint {text!r}: {exc}", at) from None
    if not isinstance(node, ConstraintAtom):
        raise RelationParseError(f"bad timing constraint {text!r}", at)
    return node


def relation_letters(rel: Statement) -> list[str]:
    from .core import statement_events
    return list(statement_events(rel))


# metrics --------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    matched_pairs: tuple = ()
    generated_count: int = 0
    gold_count: int = 0
    flags: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "generated_count": self.generated_count, "gold_count": self.gold_count,
            "matched_pairs": [list(p) for p in self.matched_pairs], "flags": list(self.flags),
        }


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _best(item: str, pool: Sequence[str], sim) -> tuple:
    best_j, best = None, 0.0
    for j, other in enumerate(pool):
        s = sim(item, other)
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"similarity {s} outside [0, 1]")
        if best_j is None or s > best:
            best_j, best = j, s
    return best_j, best


def _default_similarity():
    from .abstraction import lexical_similarity
    return lexical_similarity


def corpus_metrics(rules: Iterable[tuple], sim: Callable[[str, str], float] | None = None) -> MetricsReport:
    """Precision/recall/F1 of event extraction over many rules.

    ``rules`` yields ``(generated events, gold events)`` per rule; matches
    are searched only within the same rule; ``matched_pairs`` holds
    ``(rule index, generated index, gold index or None, score)``.  Each
    generated event scores the similarity of its best gold match (gold
    events may be reused), and symmetrically for recall.  An event with nothing to match scores 0.
    """
    sim = sim or _default_similarity()
    p_sum = r_sum = 0.0
    g_total = o_total = 0
    pairs = []
    for k, (generated, gold) in enumerate(rules):
        for i, g in enumerate(generated):
            j, s = _best(g, gold, sim)
            p_sum += s
            pairs.append((k, i, j, s))
        for g in gold:
            r_sum += _best(g, generated, sim)[1]
        g_total += len(generated)
        o_total += len(gold)
    flags = []
    if g_total == 0:
        flags.append("no generated events: precision set to 0")
    if o_total == 0:
        flags.append("no gold events: recall set to 0")
    p = p_sum / g_total if g_total else 0.0
    r = r_sum / o_total if o_total else 0.0
    return MetricsReport(p, r, f1_score(p, r), tuple(pairs), g_total, o_total, tuple(flags))


def event_metrics(generated: Sequence[str], gold: Sequence[str],
                  sim: Callable[[str, str], float] | None = None) -> MetricsReport:
    """Metrics for one flat list of events; ``matched_pairs`` holds
    ``(generated index, gold index, score)`` for the precision matches."""
    report = corpus_metrics([(generated, gold)], sim)
    pairs = tuple((i, j, s) for _, i, j, s in report.matched_pairs)
    return replace(report, matched_pairs=pairs)


def fleiss_kappa(ratings) -> float:
    """Fleiss' kappa for an items x categories matrix of rater counts."""
    m = np.asarray(ratings, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0:
        raise ValueError("ratings must be a non-empty 2-D matrix")
    if (m < 0).any():
        raise ValueError("rater counts must be non-negative")
    n = m.sum(axis=1)
    if not np.all(n == n[0]):
        raise UnevenRaterCounts(f"rows sum to different rater counts: {sorted(set(n.tolist()))}")
    n = n[0]
    if n < 2:
        raise UnevenRaterCounts("need at least two raters per item")
    per_item = ((m ** 2).sum(axis=1) - n) / (n * (n - 1))
    p_o = per_item.mean()
    shares = m.sum(axis=0) / m.sum()
    p_e = (shares ** 2).sum()
    if np.isclose(p_o, 1.0, rtol=0, atol=1e-15):
        return 1.0
    if np.isclose(p_e, 1.0, rtol=0, atol=1e-15):
        raise DegenerateAgreement("expected agreement is 1 but observed agreement is not")
    return float((p_o - p_e) / (1 - p_e))
