import json
import random
from pathlib import Path

import pytest

from horae.abstraction import AbstractionResult
from horae.consistency import Verdict, check_qualitative, check_quantitative, dpll, emit_smtlib, report_json
from horae.core import QuantInterpretation, new_library
from horae.errors import ClauseBudgetExceeded
from horae.parser import parse_library
from horae.semantics import eval_qualitative, pr_library

from gen import random_library
from oracles import brute_qualitative, brute_quantitative

GOLDEN = Path(__file__).parent / "golden"
E = '{object:"e" action:"x"}'
STAR = ('s1: shall ({object:"a" action:"x"} | {object:"b" action:"x"}) & (!{object:"c" action:"x"} | '
        '{object:"d" action:"x"}) & [t12 - t11 < t14];')


def test_dpll_basics():
    assert dpll([(1, 2), (-1,), (-2, 3)]) == {1: False, 2: True, 3: True}
    assert dpll([(1,), (-1,)]) is None
    assert dpll([]) == {}
    assert dpll([(1, 2)], {1: False})[2] is True


def test_contradiction_is_inconsistent():
    lib = parse_library(f"r1: shall {E}; r2: forbid !{E};")
    report = check_qualitative(lib)
    assert report.verdict is Verdict.INCONSISTENT
    assert report.conflict_core == ("r1", "r2")
    assert report.witness is None


def test_conflict_core_drops_bystanders():
    lib = parse_library(f'r1: shall {E}; r2: shall {{object:"z" action:"y"}}; r3: shall !{E};')
    assert check_qualitative(lib).conflict_core == ("r1", "r3")


def test_star_consistent_with_witness():
    lib = parse_library(STAR)
    report = check_qualitative(lib)
    assert report.consistent
    assert eval_qualitative(lib, report.witness)
    assert set(report.witness.time_vals) == {"t11", "t12", "t14"}


def test_theory_contradiction():
    lib = parse_library("shall [t1 < t2]; shall [t2 < t1];")
    assert not check_qualitative(lib).consistent
    assert not check_quantitative(lib).consistent


def test_theory_conflict_needs_blocking():
    # the first propositional model picks a bad constraint; the solver must move on
    lib = parse_library(f"shall [t1 < 1] | {E}; shall [t1 > 2]; shall !{E} | [t1 > 5];")
    report = check_qualitative(lib)
    assert report.consistent and eval_qualitative(lib, report.witness)


def test_quantitative_is_weaker():
    lib = parse_library(f"r1: shall {E}; r2: shall !{E};")
    assert not check_qualitative(lib).consistent
    report = check_quantitative(lib)
    assert report.consistent
    assert report.witness.event_probs == {"e1": 0.5}
    assert pr_library(lib, report.witness) == pytest.approx(0.25, abs=1e-12)


def test_quantitative_single_contradiction():
    lib = parse_library(f"shall {E} & !{E};")
    report = check_quantitative(lib)
    assert not report.consistent and report.conflict_core == ("r1",)


def test_empty_library_consistent():
    lib = new_library([])
    assert check_qualitative(lib).consistent
    assert check_quantitative(lib).consistent


def test_quantitative_constraint_in_disjunction():
    # each statement alone is satisfiable, but the unit constraints clash
    lib = parse_library(f"shall [t1 < 1] & ({E} | [t1 > 3]); shall [t1 > 2] | !{E};")
    assert check_quantitative(lib).consistent == brute_quantitative(lib)


def test_random_libraries_match_brute_force():
    rng = random.Random(99)
    for _ in range(120):
        lib = random_library(rng)
        q = check_qualitative(lib)
        assert q.consistent == brute_qualitative(lib)
        if q.consistent:
            assert eval_qualitative(lib, q.witness)
        else:
            core = lib.subset(q.conflict_core)
            assert not brute_qualitative(core)
        qq = check_quantitative(lib)
        assert qq.consistent == brute_quantitative(lib)
        if qq.consistent:
            assert pr_library(lib, qq.witness) > 0
        if q.consistent:
            assert qq.consistent


def test_qualitative_witness_as_probabilities():
    rng = random.Random(4)
    for _ in range(60):
        lib = random_library(rng)
        q = check_qualitative(lib)
        if q.consistent:
            probs = {e: 1.0 if v else 0.0 for e, v in q.witness.event_vals.items()}
            assert pr_library(lib, QuantInterpretation(probs, q.witness.time_vals)) == 1.0


def test_clause_budget():
    parts = " | ".join(f'({{object:"a{i}" action:"x"}} & {{object:"b{i}" action:"x"}})' for i in range(8))
    lib = parse_library(f"shall {parts};")
    with pytest.raises(ClauseBudgetExceeded):
        check_qualitative(lib, budget=100)
    assert check_qualitative(lib).consistent


def test_abstraction_merges_before_checking():
    lib = parse_library('shall {object:"e" action:"x"}; shall {object:"f" action:"y"};')
    negation = AbstractionResult({"e1": ("e1", 1), "e2": ("e1", -1)})
    assert check_qualitative(lib).consistent
    report = check_qualitative(lib, negation)
    assert not report.consistent
    assert check_quantitative(lib, negation).consistent
    same = AbstractionResult({"e1": ("e1", 1), "e2": ("e1", 1)})
    report = check_qualitative(lib, same)
    assert report.consistent and report.witness.event_vals == {"e1": True, "e2": True}


def test_report_json():
    lib = parse_library(STAR)
    d = report_json(lib, check_qualitative(lib))
    assert json.loads(json.dumps(d)) == d
    assert d["verdict"] == "Consistent" and d["mode"] == "Qualitative"
    assert d["rule_types"] == {"s1": "shall"}


@pytest.mark.parametrize("name, src", [
    ("single_event", f"shall {E};"),
    ("empty", ""),
    ("timed", (GOLDEN / "timed.hor").read_text()),
])
def test_smtlib_golden(name, src):
    assert emit_smtlib(parse_library(src)) == (GOLDEN / f"{name}.smt2").read_text()


def test_smtlib_is_deterministic_and_sorted():
    lib = parse_library('shall {object:"b" action:"x"} & [t2 < t10]; shall {object:"a" action:"x"} | [t1 = 2];')
    text = emit_smtlib(lib)
    assert text == emit_smtlib(lib)
    decls = [l for l in text.splitlines() if l.startswith("(declare-const")]
    assert decls == sorted(decls, key=lambda l: (l.split()[2] != "Bool", l.split()[1]))
    assert text.count("(assert (>= ts_") == 3
