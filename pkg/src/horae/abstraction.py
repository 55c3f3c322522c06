"""Event abstraction.

Natural-language events that mean the same thing (or the opposite thing)
are merged into one proposition.  A similarity provider judges each pair of
events; accepted judgments are merged with a union-find that tracks the
relative polarity of every member of a class.
"""
from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping, Protocol

import httpx

from .core import (And, BasicEvent, EventAtom, Implies, Not, Or, Rule, RuleLibrary, Statement, new_library)
from .errors import BackendError, IncompleteAbstraction, PolarityConflict

DEFAULT_THRESHOLD = 0.85


class Relation(str, Enum):
    EQUIVALENT = "equivalent"
    NEGATION = "negation"
    UNRELATED = "unrelated"


@dataclass(frozen=True)
class SimilarityJudgment:
    relation: Relation
    score: float

    def __post_init__(self):
        object.__setattr__(self, "relation", Relation(self.relation))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"similarity score outside [0, 1]: {self.score}")


class SimilarityProvider(Protocol):
    def judge(self, a: BasicEvent, b: BasicEvent) -> SimilarityJudgment: ...


# lexical baseline ------------------------------------------------------------

STOPWORDS = frozenset("""
a an the is are was were be been being of to for in on at by with and or it its this that these those
there their as from into must shall should may can will would do does did has have had any all
""".split())

# marker -> token it stands in for (None: pure negation)
NEGATION_MARKERS = {"no": None, "not": None, "never": None, "without": None, "denies": "approves"}

_WORD = re.compile(r"[0-9a-z]+|[㐀-鿿豈-﫿]+")
_CJK = re.compile(r"[㐀-鿿豈-﫿]")


def _tokens(text: str) -> list[str]:
    out = []
    for w in _WORD.findall(text.lower()):
        if _CJK.match(w):
            # no tokenizer for CJK: character bigrams (single characters stay whole)
            out.extend([w] if len(w) == 1 else [w[i:i + 2] for i in range(len(w) - 1)])
        else:
            out.append(w)
    return out


def _normalized(ev: BasicEvent) -> tuple[frozenset, int]:
    words, parity = set(), 0
    for tok in _tokens(ev.text):
        if tok in NEGATION_MARKERS:
            parity ^= 1
            if NEGATION_MARKERS[tok]:
                words.add(NEGATION_MARKERS[tok])
        elif tok not in STOPWORDS:
            words.add(tok)
    return frozenset(words), parity


def lexical_similarity(a: str, b: str) -> float:
    """Jaccard overlap of the content words of two texts."""
    return lexical_judge(BasicEvent("a", raw_text=a), BasicEvent("b", raw_text=b)).score


def lexical_judge(a: BasicEvent, b: BasicEvent) -> SimilarityJudgment:
    """Token-overlap judgment.

    Negation markers are stripped before comparing (``denies`` stands for
    ``not approves``), so the score measures content overlap; matching
    content with differing negation parity is a ``NEGATION``.
    """
    wa, pa = _normalized(a)
    wb, pb = _normalized(b)
    union = wa | wb
    score = 1.0 if not union else len(wa & wb) / len(union)
    if score >= 0.999:
        return SimilarityJudgment(Relation.EQUIVALENT if pa == pb else Relation.NEGATION, score)
    return SimilarityJudgment(Relation.UNRELATED, score)


class LexicalProvider:
    def judge(self, a: BasicEvent, b: BasicEvent) -> SimilarityJudgment:
        return lexical_judge(a, b)


class TableProvider:
    """Judgments from an explicit list of event-id pairs; other pairs are unrelated."""

    def __init__(self, pairs: Iterable):
        self.table: dict[frozenset, SimilarityJudgment] = {}
        for p in pairs:
            if isinstance(p, Mapping):
                a, b, rel, score = p["a"], p["b"], p["relation"], p.get("score", 1.0)
            else:
                a, b, rel, *rest = p
                score = rest[0] if rest else 1.0
            if Relation(rel) is Relation.UNRELATED:
                continue
            self.table[frozenset((a, b))] = SimilarityJudgment(Relation(rel), float(score))

    @classmethod
    def from_file(cls, path) -> "TableProvider":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise ValueError("pair file must hold a JSON array")
        return cls(data)

    def judge(self, a: BasicEvent, b: BasicEvent) -> SimilarityJudgment:
        return self.table.get(frozenset((a.id, b.id)), SimilarityJudgment(Relation.UNRELATED, 0.0))


class EmbeddingProvider:
    """Cosine similarity of vectors from a remote embedding service.

    ``POST {base_url}/embed`` with ``{"texts": [...]}`` must answer
    ``{"vectors": [[...], ...]}``.  Cosine cannot see negation, so this
    provider only ever reports ``EQUIVALENT`` or ``UNRELATED``.
    """

    def __init__(self, base_url: str, threshold: float = DEFAULT_THRESHOLD, timeout: float = 30.0,
                 token: str | None = None, transport: httpx.BaseTransport | None = None):
        self.base_url = base_url.rstrip("/")
        self.threshold = threshold
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self.client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self.cache: dict[str, list[float]] = {}

    def embed(self, texts: list[str]) -> list[list[float]]:
        todo = [t for t in dict.fromkeys(texts) if t not in self.cache]
        if todo:
            try:
                resp = self.client.post(f"{self.base_url}/embed", json={"texts": todo})
                resp.raise_for_status()
                vectors = resp.json()["vectors"]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                raise BackendError(f"embedding service failed: {exc}") from exc
            if len(vectors) != len(todo):
                raise BackendError(f"expected {len(todo)} vectors, got {len(vectors)}")
            self.cache.update(zip(todo, vectors))
        return [self.cache[t] for t in texts]

    def prepare(self, events: Iterable[BasicEvent]):
        self.embed([ev.text for ev in events])

    def similarity(self, a: str, b: str) -> float:
        va, vb = self.embed([a, b])
        na = math.sqrt(sum(x * x for x in va))
        nb = math.sqrt(sum(x * x for x in vb))
        if na == 0 or nb == 0:
            return 0.0
        cos = sum(x * y for x, y in zip(va, vb)) / (na * nb)
        return min(1.0, max(0.0, cos))

    def judge(self, a: BasicEvent, b: BasicEvent) -> SimilarityJudgment:
        score = self.similarity(a.text, b.text)
        rel = Relation.EQUIVALENT if score >= self.threshold else Relation.UNRELATED
        return SimilarityJudgment(rel, score)


# union-find with parity -------------------------------------------------------

class ParityUnionFind:
    """Disjoint sets where each element carries a parity relative to its root.

    ``union(a, b, odd)`` records ``a = not b`` when ``odd`` else ``a = b``.
    """

    def __init__(self, items: Iterable = ()):
        self.parent: dict = {}
        self.parity: dict = {}
        self.size: dict = {}
        for x in items:
            self.add(x)

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x
            self.parity[x] = 0
            self.size[x] = 1

    def find(self, x) -> tuple:
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        root = x
        # compress, accumulating parity from the top of the path down
        acc = 0
        for node in reversed(path):
            acc ^= self.parity[node]
            self.parity[node] = acc
            self.parent[node] = root
        return root, (self.parity[path[0]] if path else 0)

    def union(self, a, b, odd: bool) -> bool:
        """Merge; returns False when the relation contradicts known parities."""
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        want = 1 if odd else 0
        if ra == rb:
            return (pa ^ pb) == want
        if self.size[ra] < self.size[rb]:
            ra, rb, pa, pb = rb, ra, pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ want
        self.size[ra] += self.size[rb]
        return True


@dataclass(frozen=True)
class AbstractionResult:
    """``class_of[event] = (representative event id, +1 or -1)``."""

    class_of: Mapping[str, tuple]

    @property
    def class_count(self) -> int:
        return len({rep for rep, _ in self.class_of.values()})

    def classes(self) -> dict:
        out: dict[str, list] = {}
        for eid, (rep, pol) in self.class_of.items():
            out.setdefault(rep, []).append((eid, pol))
        return out

    def to_dict(self) -> dict:
        return {"class_count": self.class_count,
                "classes": {rep: {e: p for e, p in members} for rep, members in self.classes().items()}}

    @classmethod
    def identity(cls, lib: RuleLibrary) -> "AbstractionResult":
        return cls({eid: (eid, 1) for eid in lib.events})


def _trace(edges, a, b):
    """Path of accepted judgments from ``a`` to ``b`` (breadth-first)."""
    adj: dict = {}
    for x, y, rel in edges:
        adj.setdefault(x, []).append((y, rel))
        adj.setdefault(y, []).append((x, rel))
    prev = {a: None}
    queue = [a]
    for node in queue:
        if node == b:
            break
        for nxt, rel in adj.get(node, ()):
            if nxt not in prev:
                prev[nxt] = (node, rel)
                queue.append(nxt)
    path = []
    node = b
    while prev.get(node) is not None:
        p, rel = prev[node]
        path.append((p, node, rel))
        node = p
    return list(reversed(path))


def abstract_events(lib: RuleLibrary, provider: SimilarityProvider, threshold: float = DEFAULT_THRESHOLD,
                    workers: int = 1) -> AbstractionResult:
    """Partition the library's events into signed proposition classes.

    Every unordered pair is judged (pairs ordered lexicographically by id);
    equivalence and negation judgments scoring at least ``threshold`` are
    merged.  Contradictory judgments raise :class:`PolarityConflict`.
    Representatives are the first class member in library order.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    events = lib.events
    pairs = list(combinations(sorted(events), 2))
    if hasattr(provider, "prepare"):
        provider.prepare(events.values())
    judge = lambda pair: provider.judge(events[pair[0]], events[pair[1]])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            judgments = list(pool.map(judge, pairs))
    else:
        judgments = [judge(p) for p in pairs]

    uf = ParityUnionFind(events)
    accepted = []
    for (a, b), j in zip(pairs, judgments):
        if j.relation is Relation.UNRELATED or j.score < threshold:
            continue
        rel = -1 if j.relation is Relation.NEGATION else 1
        if not uf.union(a, b, rel < 0):
            raise PolarityConflict(a, b, _trace(accepted, a, b) + [(a, b, rel)])
        accepted.append((a, b, rel))

    reps: dict = {}
    class_of = {}
    for eid in events:
        root, parity = uf.find(eid)
        if root not in reps:
            reps[root] = (eid, parity)
        rep, rep_parity = reps[root]
        class_of[eid] = (rep, 1 if parity == rep_parity else -1)
    return AbstractionResult(class_of)


def _rewrite(s: Statement, lib: RuleLibrary, a: AbstractionResult) -> Statement:
    if isinstance(s, EventAtom):
        rep, pol = a.class_of[s.event.id]
        atom = EventAtom(lib.events[rep], s.timestamp)
        return atom if pol > 0 else Not(atom)
    if isinstance(s, Not):
        return Not(_rewrite(s.child, lib, a))
    if isinstance(s, (And, Or, Implies)):
        return type(s)(_rewrite(s.left, lib, a), _rewrite(s.right, lib, a))
    return s


def apply_abstraction(lib: RuleLibrary, a: AbstractionResult) -> RuleLibrary:
    """Replace each event by its class representative (negated for polarity -1)."""
    missing = [e for e in lib.events if e not in a.class_of]
    missing += [rep for e, (rep, _) in a.class_of.items() if e in lib.events and rep not in lib.events]
    if missing:
        raise IncompleteAbstraction(missing)
    rules = [Rule(r.id, r.rule_type, _rewrite(r.statement, lib, a)) for r in lib.rules]
    return new_library(rules)
