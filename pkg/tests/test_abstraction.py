import json
import random
import threading

import httpx
import pytest

from horae.abstraction import (AbstractionResult, EmbeddingProvider, LexicalProvider, ParityUnionFind, Relation,
                               SimilarityJudgment, TableProvider, abstract_events, apply_abstraction, lexical_judge,
                               lexical_similarity)
from horae.consistency import check_qualitative
from horae.core import And, BasicEvent, EventAtom, Implies, Not, Or, Rule, new_library
from horae.errors import BackendError, IncompleteAbstraction, PolarityConflict
from horae.parser import parse_library

from figure import EXPECTED, PAIRS, leave_library, signed_classes
from gen import random_library


def ev(eid, text):
    return BasicEvent(eid, raw_text=text)


def test_figure_classes():
    lib = leave_library()
    result = abstract_events(lib, TableProvider(PAIRS))
    assert sorted(map(sorted, (c.items() for c in signed_classes(result)))) == \
        sorted(map(sorted, (c.items() for c in EXPECTED)))
    assert len(signed_classes(result)) == 5
    assert result.class_count == 6  # e24 has no partner
    assert result.class_of["e24"] == ("e24", 1)


def test_figure_apply():
    lib = leave_library()
    result = abstract_events(lib, TableProvider(PAIRS))
    merged = apply_abstraction(lib, result)
    assert set(merged.events) == {"e11", "e12", "e13", "e14", "e21", "e24"}
    # s2 now says e21 & e11 & !e13 -> e24
    assert "e23" not in merged.events


def test_odd_cycle_conflict():
    lib = parse_library('shall {object:"a" action:"x"} & {object:"b" action:"x"} & {object:"c" action:"x"};')
    provider = TableProvider([("e1", "e2", "equivalent"), ("e2", "e3", "equivalent"), ("e1", "e3", "negation")])
    with pytest.raises(PolarityConflict) as exc:
        abstract_events(lib, provider)
    err = exc.value
    assert (err.event_a, err.event_b) == ("e2", "e3") or (err.event_a, err.event_b) == ("e1", "e3")
    rels = [r for _, _, r in err.trace]
    assert rels.count(-1) % 2 == 1


def test_unrelated_gives_identity():
    lib = parse_library('shall {object:"apple" action:"ripens"} | {object:"train" action:"departs"};')
    result = abstract_events(lib, LexicalProvider())
    assert result == AbstractionResult.identity(lib)
    assert apply_abstraction(lib, result) == lib


def test_apply_negative_polarity():
    lib = parse_library('shall {object:"a" action:"x"}; shall {object:"b" action:"y"};')
    a = AbstractionResult({"e1": ("e1", 1), "e2": ("e1", -1)})
    merged = apply_abstraction(lib, a)
    assert merged.rules[1].statement == Not(EventAtom(lib.events["e1"]))
    assert list(merged.events) == ["e1"]


def test_incomplete_abstraction():
    lib = parse_library('shall {object:"a" action:"x"} & {object:"b" action:"y"};')
    with pytest.raises(IncompleteAbstraction) as exc:
        apply_abstraction(lib, AbstractionResult({"e1": ("e1", 1)}))
    assert "e2" in str(exc.value)


def test_threshold_filters_judgments():
    lib = leave_library()
    assert abstract_events(lib, TableProvider(PAIRS), threshold=0.95).class_count == 11
    with pytest.raises(ValueError):
        abstract_events(lib, TableProvider(PAIRS), threshold=1.5)


def test_lexical_judge():
    j = lexical_judge(ev("a", "Leave is granted"), ev("b", "leave is granted"))
    assert j.relation is Relation.EQUIVALENT and j.score == 1.0
    j = lexical_judge(ev("a", "manager approves the request"), ev("b", "manager denies the request"))
    assert j.relation is Relation.NEGATION
    j = lexical_judge(ev("a", "apple ripens"), ev("b", "train departs"))
    assert j.relation is Relation.UNRELATED and j.score == 0.0
    j = lexical_judge(ev("a", "milk is sold"), ev("b", "milk is not sold"))
    assert j.relation is Relation.NEGATION
    assert lexical_similarity("user behavior data", "user preference data") == pytest.approx(0.5)


def test_lexical_cjk_bigrams():
    j = lexical_judge(ev("a", "员工申请年假"), ev("b", "员工申请年假"))
    assert j.relation is Relation.EQUIVALENT
    assert 0 < lexical_similarity("员工申请年假", "员工申请病假") < 1


def test_lexical_symmetric():
    rng = random.Random(0)
    words = ["manager", "approves", "denies", "not", "request", "leave", "the", "no", "period"]
    for _ in range(300):
        a = " ".join(rng.choices(words, k=rng.randint(1, 5)))
        b = " ".join(rng.choices(words, k=rng.randint(1, 5)))
        x, y = lexical_judge(ev("a", a), ev("b", b)), lexical_judge(ev("b", b), ev("a", a))
        assert x == y and 0.0 <= x.score <= 1.0


def test_judgment_score_range():
    with pytest.raises(ValueError):
        SimilarityJudgment(Relation.EQUIVALENT, 1.2)


def test_table_provider_file(tmp_path):
    path = tmp_path / "pairs.json"
    path.write_text(json.dumps(PAIRS))
    result = abstract_events(leave_library(), TableProvider.from_file(path))
    assert result.class_count == 6


def test_parity_union_find():
    uf = ParityUnionFind("abcdef")
    assert uf.union("a", "b", False)
    assert uf.union("b", "c", True)
    assert uf.union("d", "c", False)
    assert not uf.union("a", "d", False)
    assert uf.union("a", "d", True)
    ra, pa = uf.find("a")
    rd, pd = uf.find("d")
    assert ra == rd and pa != pd
    assert uf.find("e") == ("e", 0)


def test_union_find_replays_random_judgments():
    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(2, 12)
        truth = [rng.randint(0, 1) for _ in range(n)]
        uf = ParityUnionFind(range(n))
        edges = []
        for _ in range(rng.randint(1, 2 * n)):
            a, b = rng.sample(range(n), 2)
            odd = truth[a] != truth[b]
            assert uf.union(a, b, odd)
            edges.append((a, b, odd))
        for a, b, odd in edges:
            (ra, pa), (rb, pb) = uf.find(a), uf.find(b)
            assert ra == rb and (pa != pb) == odd


def test_abstraction_partition_and_determinism():
    lib = leave_library()
    r1 = abstract_events(lib, TableProvider(PAIRS))
    r2 = abstract_events(lib, TableProvider(PAIRS), workers=4)
    assert r1 == r2
    assert set(r1.class_of) == set(lib.events)
    for rep, members in r1.classes().items():
        assert r1.class_of[rep] == (rep, 1)
        assert members[0][0] == rep


def test_merging_identical_events_preserves_satisfiability():
    rng = random.Random(12)
    for _ in range(60):
        lib = random_library(rng)
        # duplicate each event under a fresh id and merge the copies back
        ids = list(lib.events)
        copies = {e: BasicEvent(e + "c", lib.events[e].components + lib.events[e].components[:1]) for e in ids}

        def swap(node, flip):
            # alternate between original and copy so both ids occur
            if isinstance(node, EventAtom):
                return EventAtom(copies[node.event.id], node.timestamp) if flip else node
            if isinstance(node, Not):
                return Not(swap(node.child, flip))
            if isinstance(node, (And, Or, Implies)):
                return type(node)(swap(node.left, flip), swap(node.right, not flip))
            return node

        dup = new_library([Rule(r.id, r.rule_type, swap(r.statement, True)) for r in lib.rules])
        pairs = [(e, e + "c", "equivalent") for e in ids]
        merged = abstract_events(dup, TableProvider(pairs))
        assert check_qualitative(dup, merged).consistent == check_qualitative(lib).consistent


def _embed_transport(vectors, calls):
    def handler(request):
        calls.append(json.loads(request.content))
        texts = json.loads(request.content)["texts"]
        return httpx.Response(200, json={"vectors": [vectors[t] for t in texts]})
    return httpx.MockTransport(handler)


def test_embedding_provider():
    vectors = {"a": [1.0, 0.0], "b": [0.99, 0.1], "c": [0.0, 1.0]}
    calls = []
    p = EmbeddingProvider("http://embed.test", transport=_embed_transport(vectors, calls))
    events = [ev("x", "a"), ev("y", "b"), ev("z", "c")]
    p.prepare(events)
    assert p.judge(events[0], events[1]).relation is Relation.EQUIVALENT
    assert p.judge(events[0], events[2]).relation is Relation.UNRELATED
    assert len(calls) == 1  # later lookups hit the cache


def test_embedding_provider_errors():
    p = EmbeddingProvider("http://embed.test", transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    with pytest.raises(BackendError):
        p.similarity("a", "b")

    def refuse(request):
        raise httpx.ConnectError("connection refused")
    p = EmbeddingProvider("http://embed.test", transport=httpx.MockTransport(refuse))
    with pytest.raises(BackendError) as exc:
        p.similarity("a", "b")
    assert "refused" in str(exc.value)


def test_concurrent_judging_is_safe():
    lock = threading.Lock()
    seen = []

    class Recording(LexicalProvider):
        def judge(self, a, b):
            with lock:
                seen.append((a.id, b.id))
            return super().judge(a, b)

    lib = leave_library()
    result = abstract_events(lib, Recording(), workers=8)
    assert len(seen) == 66
    assert result.class_of["e23"] == ("e13", -1)
