"""Typed regulation rules: parsing, consistency, probabilities, abstraction,
dataset handling and natural-language conversion."""
from .abstraction import (AbstractionResult, EmbeddingProvider, LexicalProvider, ParityUnionFind, Relation,
                          SimilarityJudgment, TableProvider, abstract_events, apply_abstraction, lexical_judge,
                          lexical_similarity)
from .consistency import (ConsistencyReport, Mode, Verdict, check_qualitative, check_quantitative, dpll,
                          emit_smtlib)
from .core import (And, BasicEvent, Comparator, ComponentKind, ConstraintAtom, EventAtom, EventComponent,
                   EventPattern, Implies, LinearExpr, Not, Or, QualInterpretation, QuantInterpretation, Rule,
                   RuleLibrary, RuleType, Statement, TimeConstraint, classify_pattern, new_library)
from .data import (CompositeRecord, MetricsReport, SingleEventRecord, ValidationRecord, corpus_metrics,
                   dump_dataset, event_metrics, f1_score, fleiss_kappa, load_dataset, parse_relation)
from .errors import *  # noqa: F401,F403
from .linear import LinSystem, solve_linear
from .parser import parse_library, parse_rule, print_library, print_rule, print_statement, tokenize
from .pipeline import (BackendRequest, ConversionResult, HttpBackend, MockBackend, convert, extract_events,
                       extract_logic, match_patterns)
from .semantics import eval_qualitative, eval_statement, pr_exact, pr_library, pr_statement, to_cnf

__version__ = "0.1.0"
