import io
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from horae.core import And, Not, Or
from horae.data import (CompositeRecord, SingleEventRecord, ValidationRecord, corpus_metrics, dump_dataset,
                        event_metrics, f1_score, fleiss_kappa, load_dataset, parse_relation, placeholder,
                        relation_letters)
from horae.errors import (DegenerateAgreement, LengthMismatch, LetterOutOfRange, RelationParseError, SchemaError,
                          UnevenRaterCounts)

R3 = "The collected information should include user behavior data, user preference data, or user transaction data."
R3_EVENTS = ["The collected information include user behavior data.",
             "The collected information include user preference data.",
             "The collected information include user transaction data."]

RECORDS = [
    {"original rule": R3, "basic events": R3_EVENTS, "logical relation": "A | B | C",
     "syntactic patterns": ["obj-act-obj"] * 3},
    {"original rule": R3, "basic events": R3_EVENTS, "logical relation": "A | B | C"},
    {"basic events": ["The response delay of orders shall not exceed 10mins."],
     "syntactic patterns": ["obj-attr-cmp-val"]},
]


def test_three_shapes():
    recs = load_dataset(json.dumps(RECORDS))
    assert [type(r) for r in recs] == [ValidationRecord, CompositeRecord, SingleEventRecord]
    assert recs[0].basic_events == tuple(R3_EVENTS)


def test_load_from_path_bytes_and_stream(tmp_path):
    path = tmp_path / "srr.json"
    path.write_text(json.dumps(RECORDS, ensure_ascii=False), encoding="utf-8")
    a = load_dataset(path)
    b = load_dataset(str(path))
    c = load_dataset(path.read_bytes())
    d = load_dataset(io.BytesIO(path.read_bytes()))
    assert a == b == c == d


def test_empty_array():
    assert load_dataset("[]") == []


def test_length_mismatch():
    bad = [{"basic events": ["a", "b", "c"], "syntactic patterns": ["x", "y"]}]
    with pytest.raises(LengthMismatch) as exc:
        load_dataset(json.dumps(bad))
    assert exc.value.index == 0


@pytest.mark.parametrize("obj, fragment", [
    ({"basic events": ["a"], "syntactic patterns": ["x"], "extra": 1}, "unknown keys"),
    ({"original rule": "r", "basic events": ["a"]}, "matches no record shape"),
    ({"original rule": "r", "basic events": ["a"], "logical relation": "A & B"}, "logical relation"),
    ({"original rule": "r", "basic events": "a", "logical relation": "A"}, "list of strings"),
    ([1, 2], "JSON object"),
])
def test_schema_errors(obj, fragment):
    with pytest.raises(SchemaError) as exc:
        load_dataset(json.dumps([RECORDS[2], obj]))
    assert exc.value.index == 1 and fragment in str(exc.value)


def test_not_an_array():
    with pytest.raises(SchemaError):
        load_dataset('{"basic events": []}')
    with pytest.raises(SchemaError):
        load_dataset("[1,")


def test_round_trip_bit_equivalent():
    recs = load_dataset(json.dumps(RECORDS))
    text = dump_dataset(recs)
    assert json.loads(text) == RECORDS
    assert load_dataset(text) == recs
    buf = io.StringIO()
    dump_dataset(recs, buf)
    assert buf.getvalue() == text


def test_relation_example():
    s = parse_relation("A & B & (C | D)", 4)
    A, B, C, D = (placeholder(x) for x in "ABCD")
    assert s == And(And(A, B), Or(C, D))
    assert relation_letters(s) == ["A", "B", "C", "D"]


def test_relation_edge_cases():
    assert parse_relation("A", 1) == placeholder("A")
    assert parse_relation("!A | B & C", 3) == Or(Not(placeholder("A")), And(placeholder("B"), placeholder("C")))
    with pytest.raises(LetterOutOfRange) as exc:
        parse_relation("A & E", 4)
    assert exc.value.letter == "E" and exc.value.event_count == 4
    for bad in ["A &", "(A", "A B", "A ^ B", "", "A)"]:
        with pytest.raises(RelationParseError):
            parse_relation(bad, 2)
    with pytest.raises(RelationParseError):
        parse_relation("A", 27)


def test_metric_examples():
    ident = lambda a, b: 1.0 if a == b else 0.0
    r = event_metrics(["x", "y"], ["x", "y"], ident)
    assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
    r = event_metrics([], ["x"], ident)
    assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0) and r.flags
    table = {("g1", "o1"): 0.8, ("g1", "o2"): 0.3, ("g2", "o1"): 0.6, ("g2", "o2"): 0.5}
    r = event_metrics(["g1", "g2"], ["o1", "o2"], lambda a, b: table.get((a, b), table.get((b, a), 0.0)))
    assert r.precision == pytest.approx(0.7)
    assert r.matched_pairs == ((0, 0, 0.8), (1, 0, 0.6))  # gold 0 reused


def test_ties_go_to_lowest_gold_index():
    r = event_metrics(["g"], ["a", "b", "c"], lambda a, b: 0.5)
    assert r.matched_pairs == ((0, 0, 0.5),)


def test_corpus_metrics_are_scoped_per_rule():
    ident = lambda a, b: 1.0 if a == b else 0.0
    r = corpus_metrics([(["x"], ["y"]), (["y"], ["x"])], ident)
    assert r.precision == 0.0
    r = corpus_metrics([(["x"], ["x"]), (["y", "z"], ["y"])], ident)
    assert r.precision == pytest.approx(2 / 3) and r.recall == 1.0
    assert [p[0] for p in r.matched_pairs] == [0, 1, 1]


def test_default_similarity_is_lexical():
    r = event_metrics(R3_EVENTS, R3_EVENTS)
    assert r.precision == r.recall == r.f1 == 1.0


def test_metrics_symmetry():
    rng = random.Random(2)
    words = ["user", "data", "leave", "manager", "request", "price", "order"]
    from horae.abstraction import lexical_similarity
    for _ in range(100):
        gen = [" ".join(rng.sample(words, 2)) for _ in range(rng.randint(0, 4))]
        gold = [" ".join(rng.sample(words, 2)) for _ in range(rng.randint(0, 4))]
        a, b = event_metrics(gen, gold, lexical_similarity), event_metrics(gold, gen, lexical_similarity)
        assert a.precision == pytest.approx(b.recall) and a.recall == pytest.approx(b.precision)


@given(st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=300)
def test_f1_identity(p, r):
    f = f1_score(p, r)
    if p + r > 0:
        assert f == pytest.approx(2 * p * r / (p + r))
        assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12
    else:
        assert f == 0.0


def test_similarity_out_of_range():
    with pytest.raises(ValueError):
        event_metrics(["a"], ["b"], lambda a, b: 1.5)


def test_kappa_examples():
    assert fleiss_kappa([[3, 0], [0, 3]]) == 1.0
    assert fleiss_kappa([[2, 1], [1, 2]]) == pytest.approx(-1 / 3, abs=1e-12)
    assert fleiss_kappa([[1, 1], [1, 1]]) == pytest.approx(-1.0, abs=1e-12)


def test_kappa_errors():
    with pytest.raises(UnevenRaterCounts):
        fleiss_kappa([[2, 1], [1, 1]])
    with pytest.raises(UnevenRaterCounts):
        fleiss_kappa([[1, 0], [0, 1]])
    # one category everywhere means expected and observed agreement are both 1
    assert fleiss_kappa([[3, 0], [3, 0]]) == 1.0
    with pytest.raises(ValueError):
        fleiss_kappa([])
    with pytest.raises(ValueError):
        fleiss_kappa([[-1, 3], [1, 1]])


def _fleiss_reference(m):
    """Textbook loop formulation."""
    N = len(m)
    n = sum(m[0])
    k = len(m[0])
    P = [(sum(x * x for x in row) - n) / (n * (n - 1)) for row in m]
    p = [sum(row[j] for row in m) / (N * n) for j in range(k)]
    Po = sum(P) / N
    Pe = sum(x * x for x in p)
    return (Po - Pe) / (1 - Pe)


def test_kappa_properties():
    rng = random.Random(6)
    for _ in range(300):
        N, k, n = rng.randint(2, 8), rng.randint(2, 4), rng.randint(2, 6)
        m = []
        for _ in range(N):
            row = [0] * k
            for _ in range(n):
                row[rng.randrange(k)] += 1
            m.append(row)
        try:
            kappa = fleiss_kappa(m)
        except DegenerateAgreement:
            continue
        assert kappa <= 1 + 1e-12
        cols = list(range(k))
        rng.shuffle(cols)
        permuted = [[row[c] for c in cols] for row in rng.sample(m, N)]
        assert fleiss_kappa(permuted) == pytest.approx(kappa, abs=1e-12)
        if not all(max(row) == n for row in m):
            assert kappa == pytest.approx(_fleiss_reference(m), abs=1e-12)
            assert kappa < 1


def test_kappa_accepts_numpy():
    assert fleiss_kappa(np.array([[3, 0], [0, 3]])) == 1.0
