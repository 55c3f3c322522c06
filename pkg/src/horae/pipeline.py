"""Natural-language rule -> HORAE conversion in three phases.

1. event extraction   - the backend lists the rule's basic events
2. logic extraction   - the backend relates them with a letter formula
3. pattern matching   - the backend names each event's syntactic pattern

The phases talk to a :class:`TransformerBackend`: a deterministic
:class:`MockBackend` for fixtures and tests, or :class:`HttpBackend` for a
remote completion service.  The assembled rule is printed and re-parsed, so
every conversion result is valid surface syntax.
"""
from __future__ import annotations

import json
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .core import (And, BasicEvent, Comparator, ComponentKind, EventAtom, EventComponent, EventPattern, Implies,
                   Not, Or, Rule, RuleType, Statement, event_to_dict, statement_events, statement_to_dict)
from .data import parse_relation, relation_letters
from .errors import AssemblyError, BackendError, EmptyExtraction, ParseError
from .parser import parse_rule, print_rule

log = logging.getLogger(__name__)

EVENT_PROMPT = "Please extract basic events of the following rule: {rule}"
LOGIC_PROMPT = ("Given the rule {rule} with basic events {events}, "
                "provide the logical relation between these basic events")
PATTERN_PROMPT = "Please determine the syntactic pattern of the basic event: {event}"

DEFAULT_CONCURRENCY = 4
ENV_URL = "HORAE_BACKEND_URL"
ENV_TOKEN = "HORAE_BACKEND_TOKEN"
ENV_TIMEOUT = "HORAE_BACKEND_TIMEOUT"
ENV_CONCURRENCY = "HORAE_CONCURRENCY"


class Phase(str, Enum):
    EVENT_EXTRACTION = "EventExtraction"
    LOGIC_EXTRACTION = "LogicExtraction"
    PATTERN_MATCHING = "PatternMatching"


@dataclass(frozen=True)
class BackendRequest:
    phase: Phase
    prompt: str


class TransformerBackend(Protocol):
    def complete(self, req: BackendRequest) -> str: ...


def normalize_prompt(prompt: str) -> str:
    return " ".join(prompt.split())


def lettered(events: Sequence[str]) -> str:
    return "; ".join(f"{chr(ord('A') + i)}: {e}" for i, e in enumerate(events))


def event_prompt(rule_text: str) -> str:
    return EVENT_PROMPT.format(rule=rule_text)


def logic_prompt(rule_text: str, events: Sequence[str]) -> str:
    return LOGIC_PROMPT.format(rule=rule_text, events=lettered(events))


def pattern_prompt(event: str) -> str:
    return PATTERN_PROMPT.format(event=event)


class MockBackend:
    """Answers from a fixed table keyed by normalized prompt."""

    def __init__(self, table: Mapping[str, str]):
        self.table = {normalize_prompt(k): v for k, v in table.items()}

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
            raise ValueError("mock fixture must be a JSON object of prompt -> response strings")
        return cls(data)

    def complete(self, req: BackendRequest) -> str:
        try:
            return self.table[normalize_prompt(req.prompt)]
        except KeyError:
            raise BackendError(f"mock backend has no response for {req.phase.value} prompt: {req.prompt!r}") from None


class HttpBackend:
    """``POST {base_url}/v1/complete`` with ``{"prompt": ...}`` -> ``{"text": ...}``.

    Transport failures and 5xx answers are retried with exponential backoff;
    requests carry no state, so retrying is safe.
    """

    def __init__(self, base_url: str, token: str | None = None, timeout: float = 30.0, retries: int = 3,
                 backoff: float = 0.25, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self.client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None, **kwargs) -> "HttpBackend":
        env = os.environ if env is None else env
        url = env.get(ENV_URL)
        if not url:
            raise BackendError(f"{ENV_URL} is not set")
        timeout = float(env.get(ENV_TIMEOUT, "30"))
        return cls(url, env.get(ENV_TOKEN), timeout, **kwargs)

    def complete(self, req: BackendRequest) -> str:
        url = f"{self.base_url}/v1/complete"
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.post(url, json={"prompt": req.prompt})
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("completion request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendError(f"{url} answered HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                text = resp.json()["text"]
            except (ValueError, KeyError, TypeError):
                raise BackendError(f"{url} returned a malformed body: {resp.text[:200]}") from None
            if not isinstance(text, str):
                raise BackendError(f"{url} returned non-text completion")
            return text
        raise BackendError(f"{url} unreachable after {self.retries + 1} attempts: {last}")


# phases ------------------------------------------------------------------------

_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)]|[A-Z][.):])\s+")


def extract_events(rule_text: str, backend: TransformerBackend) -> list[str]:
    if not rule_text or not rule_text.strip():
        raise ValueError("rule text must be non-empty")
    answer = backend.complete(BackendRequest(Phase.EVENT_EXTRACTION, event_prompt(rule_text)))
    events = []
    for item in re.split(r"[\n;]", answer):
        item = _BULLET.sub("", item).strip()
        if item:
            events.append(item)
    if not events:
        raise EmptyExtraction(f"no basic events in backend answer {answer!r}")
    return events


def extract_logic(rule_text: str, events: Sequence[str], backend: TransformerBackend) -> str:
    if not events:
        raise ValueError("need at least one basic event")
    answer = backend.complete(BackendRequest(Phase.LOGIC_EXTRACTION, logic_prompt(rule_text, events))).strip()
    parse_relation(answer, len(events))
    return answer


_PATTERN_WORDS = {"object": "obj", "action": "act", "attribute": "attr", "comparator": "cmp",
                  "compare": "cmp", "comparison": "cmp", "value": "val", "⋄": "cmp", "diamond": "cmp"}


def pattern_from_name(name: str) -> EventPattern | None:
    """Canonical pattern for a backend label such as ``obj-act-obj`` or
    ``object action object``; None when unrecognized."""
    parts = [p for p in re.split(r"[\s_\-.,]+", name.strip().lower().strip("\"'`")) if p]
    parts = [_PATTERN_WORDS.get(p, p) for p in parts]
    if parts[-2:-1] == ["attr"] or (len(parts) >= 2 and parts[-1] == "val" and "cmp" not in parts):
        parts.insert(len(parts) - 1, "cmp")
    try:
        pattern = EventPattern("-".join(parts))
    except ValueError:
        return None
    return None if pattern is EventPattern.OTHER else pattern


def match_patterns(events: Sequence[str], backend: TransformerBackend, concurrency: int = DEFAULT_CONCURRENCY,
                   warnings: list | None = None) -> list[EventPattern]:
    """One request per event, fanned out over ``concurrency`` threads; the
    result keeps input order.  Unknown labels become ``OTHER`` with a warning."""
    if not events:
        raise ValueError("need at least one basic event")
    reqs = [BackendRequest(Phase.PATTERN_MATCHING, pattern_prompt(e)) for e in events]
    if concurrency > 1 and len(reqs) > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            answers = list(pool.map(backend.complete, reqs))
    else:
        answers = [backend.complete(r) for r in reqs]
    out = []
    for event, answer in zip(events, answers):
        pattern = pattern_from_name(answer)
        if pattern is None:
            if warnings is not None:
                warnings.append(f"unknown pattern {answer.strip()!r} for event {event!r}; using other")
            pattern = EventPattern.OTHER
        out.append(pattern)
    return out


# rule type --------------------------------------------------------------------

SHOULD_WORDS = {"should", "advised", "recommended", "recommend"}
SHALL_WORDS = {"must", "shall", "mandatory", "required"}
FORBID_WORDS = {"no", "not", "cannot", "forbidden", "prohibited", "never"}
# a negation right before one of these is part of a threshold ("shall not exceed")
_COMPARISON_WORDS = {"exceed", "exceeds", "surpass", "more", "less", "fewer", "greater", "later", "earlier",
                     "above", "below", "over", "under", "higher", "lower"}


def detect_rule_type(rule_text: str) -> tuple[RuleType, str | None]:
    words = re.findall(r"[a-z]+", rule_text.lower())
    if SHOULD_WORDS & set(words):
        return RuleType.SHOULD, None
    for i, w in enumerate(words):
        if w in FORBID_WORDS and not (i + 1 < len(words) and words[i + 1] in _COMPARISON_WORDS):
            return RuleType.FORBID, None
    if SHALL_WORDS & set(words):
        return RuleType.SHALL, None
    return RuleType.SHALL, "no modal keyword found; defaulting to shall"


# event components -----------------------------------------------------------------

_MODALS = {"must", "shall", "should", "may", "can", "cannot", "will", "would", "not", "never", "be", "is", "are",
           "to", "has", "have", "need", "needs", "always"}
_DETERMINERS = {"the", "a", "an", "all", "any", "each", "every", "this", "that", "these", "those", "its", "their"}
_VERBS = {
    "include", "includes", "wash", "washes", "exceed", "exceeds", "sell", "sells", "sold", "submit", "submits",
    "submitted", "file", "files", "filed", "approve", "approves", "approved", "deny", "denies", "denied",
    "request", "requests", "requested", "obtain", "obtains", "ensure", "ensures", "conduct", "conducts", "wear",
    "wears", "review", "reviews", "disclose", "discloses", "provide", "provides", "apply", "applies", "remain",
    "remains", "collect", "collects", "store", "stores", "report", "reports", "use", "uses", "keep", "keeps",
    "contain", "contains", "record", "records", "inform", "informs", "notify", "notifies", "check", "checks",
    "display", "displays", "sound", "sounds", "operate", "operates", "grant", "granted", "declined", "smoke",
    "smoking", "return", "returns", "verify", "verifies", "register", "registers", "pay", "pays", "issue",
    "issues", "receive", "receives", "perform", "performs", "maintain", "maintains", "sign", "signs",
}
_CMP_PHRASES = [
    ("no more than", Comparator.LE), ("not more than", Comparator.LE), ("not exceed", Comparator.LE),
    ("at most", Comparator.LE), ("no later than", Comparator.LE), ("within", Comparator.LE),
    ("no less than", Comparator.GE), ("not less than", Comparator.GE), ("at least", Comparator.GE),
    ("not below", Comparator.GE), ("more than", Comparator.GT), ("greater than", Comparator.GT),
    ("exceeds", Comparator.GT), ("exceed", Comparator.GT), ("above", Comparator.GT), ("over", Comparator.GT),
    ("less than", Comparator.LT), ("fewer than", Comparator.LT), ("below", Comparator.LT),
    ("under", Comparator.LT), ("equal to", Comparator.EQ), ("equals", Comparator.EQ), ("exactly", Comparator.EQ),
]
_CMP_RE = re.compile(r"\b(" + "|".join(re.escape(p) for p, _ in _CMP_PHRASES) + r")\b", re.IGNORECASE)
_CMP_OF = {p: c for p, c in _CMP_PHRASES}


def _strip_modals(words: list[str], from_end=False) -> list[str]:
    words = list(words)
    if from_end:
        while words and words[-1].lower() in _MODALS:
            words.pop()
    else:
        while words and words[0].lower() in _MODALS:
            words.pop(0)
    return words


def _verb_index(words: list[str]) -> int | None:
    for i in range(1, len(words)):
        w = words[i].lower()
        if w in _MODALS:
            rest = _strip_modals(words[i:])
            return len(words) - len(rest) if rest else None
        if w in _VERBS:
            return i
    for i in range(1, len(words)):
        w = words[i].lower()
        prev = words[i - 1].lower()
        if prev not in _DETERMINERS and re.fullmatch(r"[a-z]+(?:es|ed|s)", w) and not w.endswith("ss"):
            return i
    return None


def componentize(text: str, pattern: EventPattern) -> tuple[tuple, Comparator | None, list[str]]:
    """Shallow split of an event sentence into components for ``pattern``.

    Returns (components, comparator, warnings).  When the split fails the
    whole text becomes a single object component and a warning says so.
    """
    O, A, T, V = ComponentKind.OBJECT, ComponentKind.ACTION, ComponentKind.ATTRIBUTE, ComponentKind.VALUE
    clean = text.strip().rstrip(".;!")
    words = clean.split()
    fallback = ((EventComponent(O, clean or text),), None,
                [f"could not split {text!r} as {pattern.value}; kept as a single object"])
    if not words:
        return fallback
    join = " ".join

    if pattern.has_comparator:
        m = _CMP_RE.search(clean)
        if m is None:
            return fallback
        cmp = _CMP_OF[m.group(1).lower()]
        left = _strip_modals(clean[:m.start()].split(), from_end=True)
        value = clean[m.end():].strip()
        if not left or not value:
            return fallback
        warnings = []
        if pattern is EventPattern.OBJ_ATTR_CMP_VAL:
            lw = join(left)
            if " of " in lw:
                attr, obj = lw.split(" of ", 1)
            else:
                obj, attr = lw, lw
                warnings.append(f"no attribute found in {lw!r}; using it for object and attribute")
            comps = (EventComponent(O, obj), EventComponent(T, attr), EventComponent(V, value))
        else:
            left = _strip_modals(left)
            if not left:
                return fallback
            action, attr = left[0], join(left[1:])
            if not attr:
                attr = action
                warnings.append(f"no attribute found in {join(left)!r}")
            comps = (EventComponent(A, action), EventComponent(T, attr), EventComponent(V, value))
        return comps, cmp, warnings

    if pattern is EventPattern.ACT_OBJ:
        words = _strip_modals(words)
        if len(words) < 2:
            return fallback
        return (EventComponent(A, words[0]), EventComponent(O, join(words[1:]))), None, []

    if pattern in (EventPattern.OBJ_ACT, EventPattern.OBJ_ACT_OBJ):
        v = _verb_index(words)
        if v is None:
            return fallback
        subject = _strip_modals(words[:v], from_end=True)
        if not subject:
            return fallback
        if pattern is EventPattern.OBJ_ACT:
            return (EventComponent(O, join(subject)), EventComponent(A, join(words[v:]))), None, []
        if v + 1 >= len(words):
            return fallback
        return ((EventComponent(O, join(subject)), EventComponent(A, words[v]),
                 EventComponent(O, join(words[v + 1:]))), None, [])

    return (EventComponent(O, clean),), None, []


# conversion ------------------------------------------------------------------------

class RuleTypeSource(str, Enum):
    KEYWORD_HEURISTIC = "KeywordHeuristic"
    BACKEND_PROVIDED = "BackendProvided"


@dataclass(frozen=True)
class ConversionResult:
    rule: Rule
    events: tuple
    relation: str
    patterns: tuple
    rule_type_source: RuleTypeSource
    warnings: tuple = ()

    @property
    def text(self) -> str:
        return print_rule(self.rule)

    def to_dict(self) -> dict:
        return {
            "rule": {"id": self.rule.id, "type": self.rule.rule_type.value,
                     "statement": statement_to_dict(self.rule.statement), "text": self.text},
            "events": [dict(event_to_dict(ev), text=ev.text) for ev in self.events],
            "relation": self.relation,
            "patterns": [p.value for p in self.patterns],
            "rule_type_source": self.rule_type_source.value,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)


def _substitute(node: Statement, by_letter: Mapping[str, BasicEvent]) -> Statement:
    if isinstance(node, EventAtom):
        return EventAtom(by_letter[node.event.id], node.timestamp)
    if isinstance(node, Not):
        return Not(_substitute(node.child, by_letter))
    if isinstance(node, (And, Or, Implies)):
        return type(node)(_substitute(node.left, by_letter), _substitute(node.right, by_letter))
    return node


def convert(rule_text: str, backend: TransformerBackend, concurrency: int = DEFAULT_CONCURRENCY,
            rule_id: str = "r1") -> ConversionResult:
    """Run the three phases and assemble a parsed rule."""
    if not rule_text or not rule_text.strip():
        raise ValueError("rule text must be non-empty")
    warnings: list[str] = []
    events = extract_events(rule_text, backend)
    relation = extract_logic(rule_text, events, backend)
    patterns = match_patterns(events, backend, concurrency, warnings)

    rule_type, note = detect_rule_type(rule_text)
    if note:
        warnings.append(note)

    skeleton = parse_relation(relation, len(events))
    used = set(relation_letters(skeleton))
    letters = [chr(ord("A") + i) for i in range(len(events))]
    unused = [l for l in letters if l not in used]
    if unused:
        raise AssemblyError(f"relation {relation!r} leaves events {unused} unused")

    by_letter = {}
    for letter, text, pattern in zip(letters, events, patterns):
        comps, cmp, notes = componentize(text, pattern)
        warnings.extend(notes)
        by_letter[letter] = BasicEvent(letter, comps, cmp, text)
    if len({ev.body for ev in by_letter.values()}) < len(by_letter):
        warnings.append("two events share identical components and were merged")
    draft = Rule(rule_id, rule_type, _substitute(skeleton, by_letter))
    try:
        text = print_rule(draft)
        rule = parse_rule(text)
    except (ParseError, ValueError) as exc:
        raise AssemblyError(f"assembled rule does not parse: {exc}") from exc
    rule = replace(rule, id=rule_id)

    parsed = {ev.body: ev for ev in statement_events(rule.statement).values()}
    out_events = tuple(replace(parsed[by_letter[l].body], raw_text=t) for l, t in zip(letters, events))
    return ConversionResult(rule, out_events, relation, tuple(patterns), RuleTypeSource.KEYWORD_HEURISTIC,
                            tuple(warnings))
