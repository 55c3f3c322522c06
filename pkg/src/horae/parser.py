"""Surface syntax for rules (``.hor`` files).

Grammar::

    library     := rule*
    rule        := [IDENT ':'] TYPE statement ';'
    TYPE        := 'shall' | 'should' | 'forbid'
    statement   := implication
    implication := disjunction ['->' implication]
    disjunction := conjunction ('|' conjunction)*
    conjunction := negation ('&' negation)*
    negation    := '!' negation | atom
    atom        := '(' statement ')' | timed_event | event | time_constraint
    timed_event := '<' IDENT ',' event '>'
    event       := '{' component+ [CMP component] '}'
    component   := KIND ':' QUOTED_TEXT        KIND in object|action|attribute|value
    time_constraint := '[' lin_expr CMP lin_expr ']'
    lin_expr    := term (('+' | '-') term)*
    term        := NUMBER | IDENT | NUMBER '*' IDENT
    CMP         := '<' | '>' | '<=' | '>=' | '='

``#`` starts a comment running to the end of the line.  Spans are character
offsets into the source string.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .core import (And, Comparator, ComponentKind, ConstraintAtom, EventAtom, EventComponent, Implies,
                   LinearExpr, Not, Or, Rule, RuleLibrary, RuleType, Statement, TimeConstraint, BasicEvent,
                   classify_pattern, new_library)
from .errors import DuplicateRuleId, ParseError

__all__ = ["Token", "tokenize", "parse_rule", "parse_library", "print_rule", "print_statement",
           "print_library", "classify_pattern", "format_number"]

KEYWORD, IDENT, NUMBER, TEXT, PUNCT, EOF = "Keyword", "Ident", "Number", "Text", "Punct", "EOF"

TYPES = {t.value for t in RuleType}
KINDS = {k.value for k in ComponentKind}
KEYWORDS = TYPES | KINDS
CMPS = {c.value for c in Comparator}

_TOKEN_RE = re.compile(r"""
    (?P<skip>\s+|\#[^\n]*)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<text>"(?:[^"\\]|\\.)*")
  | (?P<punct>->|<=|>=|[<>=!&|(){}\[\],:;+\-*])
""", re.VERBOSE | re.DOTALL)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    span: tuple

    @property
    def text_value(self) -> str:
        return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), self.lexeme[1:-1])


def tokenize(src: str) -> list[Token]:
    """Split ``src`` into tokens; whitespace and comments are dropped.  The
    final token is an empty EOF token at ``len(src)``."""
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            if src[pos] == '"':
                raise ParseError("unterminated string", (pos, n), src=src)
            raise ParseError(f"unexpected character {src[pos]!r}", (pos, pos + 1), src=src)
        group = m.lastgroup
        lexeme = m.group()
        if group != "skip":
            if group == "word":
                kind = KEYWORD if lexeme in KEYWORDS else IDENT
            else:
                kind = {"number": NUMBER, "text": TEXT, "punct": PUNCT}[group]
            tokens.append(Token(kind, lexeme, (pos, m.end())))
        pos = m.end()
    tokens.append(Token(EOF, "", (n, n)))
    return tokens


class _EventTable:
    """Assigns ids to event bodies, de-duplicating identical ones."""

    def __init__(self):
        self.by_body: dict = {}

    def intern(self, components, comparator, raw) -> BasicEvent:
        key = (components, comparator)
        ev = self.by_body.get(key)
        if ev is None:
            ev = BasicEvent(f"e{len(self.by_body) + 1}", components, comparator, raw)
            self.by_body[key] = ev
        return ev


class _Parser:
    def __init__(self, src: str, events: _EventTable | None = None):
        self.src = src
        self.tokens = tokenize(src)
        self.pos = 0
        self.events = events or _EventTable()

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def at(self, lexeme: str) -> bool:
        t = self.tok
        return t.kind in (PUNCT, KEYWORD) and t.lexeme == lexeme

    def advance(self) -> Token:
        t = self.tok
        if t.kind != EOF:
            self.pos += 1
        return t

    def error(self, message, expected=()):
        t = self.tok
        found = "end of input" if t.kind == EOF else repr(t.lexeme)
        raise ParseError(f"{message}, found {found}", t.span, expected, src=self.src)

    def expect(self, lexeme: str) -> Token:
        if not self.at(lexeme):
            self.error(f"expected {lexeme!r}", [repr(lexeme)])
        return self.advance()

    # grammar
    def rule(self, default_id: str, terminated: bool) -> Rule:
        rule_id = default_id
        if self.tok.kind == IDENT and self.tokens[self.pos + 1].lexeme == ":":
            rule_id = self.advance().lexeme
            self.advance()
        t = self.tok
        if not (t.kind == KEYWORD and t.lexeme in TYPES):
            self.error("expected a rule type", sorted(TYPES))
        self.advance()
        body = self.statement()
        if terminated:
            self.expect(";")
        elif self.at(";"):
            self.advance()
        return Rule(rule_id, RuleType(t.lexeme), body)

    def statement(self) -> Statement:
        left = self.disjunction()
        if self.at("->"):
            self.advance()
            return Implies(left, self.statement())
        return left

    def disjunction(self) -> Statement:
        node = self.conjunction()
        while self.at("|"):
            self.advance()
            node = Or(node, self.conjunction())
        return node

    def conjunction(self) -> Statement:
        node = self.negation()
        while self.at("&"):
            self.advance()
            node = And(node, self.negation())
        return node

    def negation(self) -> Statement:
        if self.at("!"):
            self.advance()
            return Not(self.negation())
        return self.atom()

    def atom(self) -> Statement:
        if self.at("("):
            self.advance()
            node = self.statement()
            self.expect(")")
            return node
        if self.at("<"):
            self.advance()
            if self.tok.kind != IDENT:
                self.error("expected a timestamp name", [IDENT])
            name = self.advance().lexeme
            self.expect(",")
            ev = self.event()
            self.expect(">")
            return EventAtom(ev, name)
        if self.at("{"):
            return EventAtom(self.event())
        if self.at("["):
            return ConstraintAtom(self.constraint())
        self.error("expected a statement", ["'('", "'<'", "'{'", "'['", "'!'"])

    def component(self) -> EventComponent:
        t = self.tok
        if not (t.kind == KEYWORD and t.lexeme in KINDS):
            self.error("expected an event component", sorted(KINDS))
        self.advance()
        self.expect(":")
        if self.tok.kind != TEXT:
            self.error("expected quoted text", [TEXT])
        text_tok = self.advance()
        try:
            return EventComponent(ComponentKind(t.lexeme), text_tok.text_value)
        except ValueError as exc:
            raise ParseError(str(exc), text_tok.span, src=self.src) from None

    def event(self) -> BasicEvent:
        self.expect("{")
        comps = [self.component()]
        while self.tok.kind == KEYWORD and self.tok.lexeme in KINDS:
            comps.append(self.component())
        comparator = None
        if self.tok.kind == PUNCT and self.tok.lexeme in CMPS:
            comparator = Comparator(self.advance().lexeme)
            comps.append(self.component())
        if not self.at("}"):
            self.error("expected a component, comparator or '}'", sorted(KINDS) + sorted(CMPS) + ["'}'"])
        self.advance()
        return self.events.intern(tuple(comps), comparator, None)

    def constraint(self) -> TimeConstraint:
        self.expect("[")
        lhs = self.lin_expr()
        if not (self.tok.kind == PUNCT and self.tok.lexeme in CMPS):
            self.error("expected a comparison", sorted(CMPS))
        cmp = Comparator(self.advance().lexeme)
        rhs = self.lin_expr()
        self.expect("]")
        return TimeConstraint(lhs, cmp, rhs)

    def lin_expr(self) -> LinearExpr:
        terms, constant = [], Fraction(0)
        sign = 1
        while True:
            t = self.tok
            if t.kind == NUMBER:
                value = Fraction(self.advance().lexeme) * sign
                if self.at("*"):
                    self.advance()
                    if self.tok.kind != IDENT:
                        self.error("expected a timestamp name", [IDENT])
                    terms.append((value, self.advance().lexeme))
                else:
                    constant += value
            elif t.kind == IDENT:
                terms.append((Fraction(sign), self.advance().lexeme))
            else:
                self.error("expected a number or timestamp name", [NUMBER, IDENT])
            if self.at("+"):
                sign = 1
            elif self.at("-"):
                sign = -1
            else:
                return LinearExpr(tuple(terms), constant)
            self.advance()


def parse_rule(src: str) -> Rule:
    """Parse a single rule; the trailing ``;`` is optional.  The rule id is
    ``r1`` unless the source carries a label."""
    p = _Parser(src)
    rule = p.rule("r1", terminated=False)
    if p.tok.kind != EOF:
        p.error("expected end of input", [EOF])
    return rule


def parse_library(src: str) -> RuleLibrary:
    """Parse ``;``-terminated rules.  Identical event bodies share one id
    (``e1``, ``e2``, ... in first-occurrence order); unlabeled rules are
    named ``r<position>``."""
    p = _Parser(src)
    rules = []
    seen = set()
    while p.tok.kind != EOF:
        rule = p.rule(f"r{len(rules) + 1}", terminated=True)
        if rule.id in seen:
            raise DuplicateRuleId(rule.id)
        seen.add(rule.id)
        rules.append(rule)
    return new_library(rules)


# printing ------------------------------------------------------------------

def format_number(x: Fraction) -> str:
    """Exact decimal rendering of a non-negative rational."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("format_number expects a non-negative value")
    num, den = x.numerator, x.denominator
    if den == 1:
        return str(num)
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        raise ValueError(f"{x} has no finite decimal expansion")
    k = max(twos, fives)
    digits = str(num * 10 ** k // den).rjust(k + 1, "0")
    return f"{digits[:-k]}.{digits[-k:]}".rstrip("0").rstrip(".")


def _print_expr(e: LinearExpr) -> str:
    pieces = []
    for coef, var in e.terms:
        mag = abs(coef)
        pieces.append((coef < 0, var if mag == 1 else f"{format_number(mag)}*{var}"))
    const = e.constant
    if not pieces or const != 0 or pieces[0][0]:
        if pieces and pieces[0][0]:
            pieces.insert(0, (const < 0, format_number(abs(const))))
        else:
            pieces.append((const < 0, format_number(abs(const))))
    if pieces[0][0]:
        # only reachable for a bare negative constant
        pieces.insert(0, (False, "0"))
    out = pieces[0][1]
    for neg, text in pieces[1:]:
        out += f" {'-' if neg else '+'} {text}"
    return out


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def print_event(ev: BasicEvent) -> str:
    if not ev.components:
        raise ValueError(f"event {ev.id!r} has no components to print")
    parts = [f"{c.kind.value}:{_quote(c.text)}" for c in ev.components]
    if ev.comparator is not None:
        parts.insert(len(parts) - 1, ev.comparator.value)
    return "{" + " ".join(parts) + "}"


_PREC = {Implies: 1, Or: 2, And: 3, Not: 4}


def _prec(node) -> int:
    return _PREC.get(type(node), 5)


def print_statement(s: Statement) -> str:
    def wrap(node, minimum):
        text = print_statement(node)
        return f"({text})" if _prec(node) < minimum else text

    if isinstance(s, EventAtom):
        body = print_event(s.event)
        return body if s.timestamp is None else f"<{s.timestamp}, {body}>"
    if isinstance(s, ConstraintAtom):
        c = s.constraint
        return f"[{_print_expr(c.lhs)} {c.cmp.value} {_print_expr(c.rhs)}]"
    if isinstance(s, Not):
        return "!" + wrap(s.child, 4)
    if isinstance(s, Implies):
        return f"{wrap(s.left, 2)} -> {wrap(s.right, 1)}"
    op, p = ("&", 3) if isinstance(s, And) else ("|", 2)
    return f"{wrap(s.left, p)} {op} {wrap(s.right, p + 1)}"


def print_rule(rule: Rule) -> str:
    """Canonical text: minimal parentheses, single spaces, no label."""
    return f"{rule.rule_type.value} {print_statement(rule.statement)}"


def print_library(lib: RuleLibrary) -> str:
    lines = []
    for r in lib.rules:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", r.id) or r.id in KEYWORDS:
            raise ValueError(f"rule id {r.id!r} cannot be written as a label")
        lines.append(f"{r.id}: {print_rule(r)};")
    return "\n".join(lines) + ("\n" if lines else "")
