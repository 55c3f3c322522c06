"""``horae`` command line.

Exit codes: 0 success, 1 negative verdict (an inconsistent library),
2 usage or input error.  Results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction

from . import abstraction as abst
from . import consistency, data, pipeline
from .core import QuantInterpretation, library_to_dict
from .errors import HoraeError, ParseError
from .parser import parse_library, print_library
from .semantics import pr_exact, pr_statement

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2
log = logging.getLogger("horae")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _read_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{path}: invalid JSON: {exc}") from None


def _load_library(path: str):
    src = _read_text(path)
    try:
        return parse_library(src)
    except ParseError as exc:
        raise _UsageError(f"{path}:{exc}") from None


def _emit(args, human: str, payload) -> None:
    if args.format == "json":
        print(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True))
    else:
        print(human)


def _table_provider(path: str) -> abst.TableProvider:
    try:
        return abst.TableProvider(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"{path}: bad pair table: {exc}") from None


# subcommands ------------------------------------------------------------------

def cmd_parse(args) -> int:
    lib = _load_library(args.file)
    _emit(args, print_library(lib).rstrip("\n"), library_to_dict(lib))
    return EXIT_OK


def _human_report(report) -> str:
    lines = [report.verdict.value]
    if report.witness is not None:
        w = report.to_dict()["witness"]
        for eid, v in w["events"].items():
            lines.append(f"  {eid} = {v}")
        for t, v in w["timestamps"].items():
            lines.append(f"  {t} = {v}")
    if report.conflict_core is not None:
        lines.append("  conflicting rules: " + ", ".join(report.conflict_core))
    return "\n".join(lines)


def cmd_check(args) -> int:
    lib = _load_library(args.file)
    a = None
    if args.abstraction:
        a = abst.abstract_events(lib, _table_provider(args.abstraction), args.threshold)
    check = consistency.check_qualitative if args.mode == "qual" else consistency.check_quantitative
    report = check(lib, a)
    _emit(args, _human_report(report), consistency.report_json(lib, report))
    return EXIT_OK if report.consistent else EXIT_NEGATIVE


def _interpretation(path: str) -> QuantInterpretation:
    obj = _read_json(path)
    if not isinstance(obj, dict) or not set(obj) <= {"events", "timestamps"}:
        raise _UsageError(f'{path}: expected {{"events": {{...}}, "timestamps": {{...}}}}')
    times = {k: Fraction(str(v)) if isinstance(v, (int, float)) and not isinstance(v, bool) else v
             for k, v in obj.get("timestamps", {}).items()}
    try:
        return QuantInterpretation(obj.get("events", {}), times)
    except ValueError as exc:
        raise _UsageError(f"{path}: {exc}") from None


def cmd_prob(args) -> int:
    lib = _load_library(args.file)
    interp = _interpretation(args.assign)
    pr = pr_exact if args.exact else pr_statement
    per_rule = {r.id: pr(r.statement, interp) for r in lib.rules}
    total = 1.0
    for p in per_rule.values():
        total *= p
    if len(per_rule) == 1:
        human = f"{total:.12g}"
    else:
        human = "\n".join([f"{rid}: {p:.12g}" for rid, p in per_rule.items()] + [f"product: {total:.12g}"])
    _emit(args, human, {"rules": per_rule, "product": total, "method": "exact" if args.exact else "recursive"})
    return EXIT_OK


def cmd_emit_smt(args) -> int:
    lib = _load_library(args.file)
    a = abst.abstract_events(lib, _table_provider(args.abstraction), args.threshold) if args.abstraction else None
    sys.stdout.write(consistency.emit_smtlib(lib, a))
    return EXIT_OK


def cmd_abstract(args) -> int:
    if args.pairs and args.provider != "table":
        raise _UsageError("--pairs only applies to --provider table")
    if args.url and args.provider != "embed":
        raise _UsageError("--url only applies to --provider embed")
    lib = _load_library(args.file)
    if args.provider == "lexical":
        provider = abst.LexicalProvider()
    elif args.provider == "table":
        if not args.pairs:
            raise _UsageError("--provider table needs --pairs FILE")
        provider = _table_provider(args.pairs)
    else:
        url = args.url or os.environ.get("HORAE_EMBED_URL")
        if not url:
            raise _UsageError("--provider embed needs --url or HORAE_EMBED_URL")
        provider = abst.EmbeddingProvider(url, args.threshold, token=os.environ.get("HORAE_BACKEND_TOKEN"))
    result = abst.abstract_events(lib, provider, args.threshold)
    lines = [f"{result.class_count} classes"]
    for rep, members in result.classes().items():
        lines.append("  " + " = ".join(e if p > 0 else "!" + e for e, p in members))
    _emit(args, "\n".join(lines), result.to_dict())
    return EXIT_OK


def cmd_dataset(args) -> int:
    try:
        records = data.load_dataset(args.file)
    except OSError as exc:
        raise _UsageError(str(exc)) from None
    except data.SchemaError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    counts: dict[str, int] = {}
    for r in records:
        counts[type(r).__name__] = counts.get(type(r).__name__, 0) + 1
    human = f"{len(records)} records valid" + "".join(f"\n  {k}: {v}" for k, v in sorted(counts.items()))
    _emit(args, human, {"valid": True, "records": len(records), "shapes": counts})
    return EXIT_OK


def _event_lists(path: str) -> list:
    obj = _read_json(path)
    if isinstance(obj, list) and all(isinstance(x, str) for x in obj):
        return [list(obj)]
    try:
        return [list(r.basic_events) for r in data.load_dataset(json.dumps(obj))]
    except data.SchemaError as exc:
        raise _UsageError(f"{path}: {exc}") from None


def cmd_metrics(args) -> int:
    if args.url and args.similarity != "embed":
        raise _UsageError("--url only applies to --similarity embed")
    pred, gold = _event_lists(args.pred), _event_lists(args.gold)
    if len(pred) != len(gold):
        raise _UsageError(f"{len(pred)} predicted rules but {len(gold)} gold rules")
    sim = None
    if args.similarity == "embed":
        url = args.url or os.environ.get("HORAE_EMBED_URL")
        if not url:
            raise _UsageError("--similarity embed needs --url or HORAE_EMBED_URL")
        sim = abst.EmbeddingProvider(url).similarity
    report = data.corpus_metrics(list(zip(pred, gold)), sim)
    human = f"precision {report.precision:.4f}\nrecall    {report.recall:.4f}\nf1        {report.f1:.4f}"
    human += "".join(f"\n  note: {f}" for f in report.flags)
    _emit(args, human, report.to_dict())
    return EXIT_OK


def cmd_convert(args) -> int:
    if args.backend == "mock":
        if not args.fixture:
            raise _UsageError("--backend mock needs --fixture FILE")
        backend = pipeline.MockBackend.from_file(args.fixture)
    else:
        if args.fixture:
            raise _UsageError("--fixture only applies to --backend mock")
        backend = pipeline.HttpBackend.from_env()
    concurrency = int(os.environ.get(pipeline.ENV_CONCURRENCY, pipeline.DEFAULT_CONCURRENCY))
    rules = [line.strip() for line in _read_text(args.file).splitlines() if line.strip()]
    results = [pipeline.convert(text, backend, concurrency, f"r{i}") for i, text in enumerate(rules, 1)]
    human = []
    for res in results:
        human.append(f"{res.rule.id}: {res.text};")
        human.extend(f"# warning: {w}" for w in res.warnings)
    _emit(args, "\n".join(human), [r.to_dict() for r in results])
    return EXIT_OK


# wiring -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="horae", description="Regulation rule language toolkit.")
    p.add_argument("--format", choices=["human", "json"], default="human")
    p.add_argument("-v", "--verbose", action="store_true")
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=["human", "json"], default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("parse", parents=[common], help="parse a rule library and pretty-print it")
    s.add_argument("file")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("check", parents=[common], help="check consistency of a rule library")
    s.add_argument("file")
    s.add_argument("--mode", choices=["qual", "quant"], default="qual")
    s.add_argument("--abstraction", metavar="PAIRS", help="JSON pair table of correlated events")
    s.add_argument("--threshold", type=float, default=abst.DEFAULT_THRESHOLD)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("prob", parents=[common], help="probability of each rule under an assignment")
    s.add_argument("file")
    s.add_argument("--assign", required=True, metavar="JSON")
    s.add_argument("--exact", action="store_true", help="enumerate all event assignments")
    s.set_defaults(func=cmd_prob)

    s = sub.add_parser("emit-smt", parents=[common], help="write an SMT-LIB 2 script to stdout")
    s.add_argument("file")
    s.add_argument("--abstraction", metavar="PAIRS")
    s.add_argument("--threshold", type=float, default=abst.DEFAULT_THRESHOLD)
    s.set_defaults(func=cmd_emit_smt)

    s = sub.add_parser("abstract", parents=[common], help="merge correlated events into signed classes")
    s.add_argument("file")
    s.add_argument("--provider", choices=["lexical", "table", "embed"], default="lexical")
    s.add_argument("--pairs", metavar="JSON")
    s.add_argument("--url")
    s.add_argument("--threshold", type=float, default=abst.DEFAULT_THRESHOLD)
    s.set_defaults(func=cmd_abstract)

    s = sub.add_parser("dataset", parents=[common], help="dataset utilities")
    dsub = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    v = dsub.add_parser("validate", parents=[common], help="validate an SRR-Eval JSON file")
    v.add_argument("file")
    v.set_defaults(func=cmd_dataset)

    s = sub.add_parser("metrics", parents=[common], help="precision/recall/F1 of extracted events")
    s.add_argument("--pred", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--similarity", choices=["lexical", "embed"], default="lexical")
    s.add_argument("--url")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("convert", parents=[common], help="convert natural-language rules (one per line)")
    s.add_argument("file")
    s.add_argument("--backend", choices=["mock", "http"], default="mock")
    s.add_argument("--fixture")
    s.set_defaults(func=cmd_convert)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"horae: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HoraeError, OSError, ValueError) as exc:
        print(f"horae: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
