"""Command-line entry point: ``swot <command> ...``.

Exit status: 0 on success, 1 on usage errors, 2 when a stage fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import StageError, SwotError
from .ntriples import parse_ntriples, serialize_ntriples
from .pipeline import benchmark, render_text, run_pipeline
from .rdf import Graph, merge
from .registry import find_templates, load_registry
from .rules import parse_rules, saturate
from .senml import annotate, default_mapping, load_mapping, parse_senml
from .sparql import execute, parse_query, to_json, to_tsv


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read(path: str, stage: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StageError(stage, f"cannot read {path}: {exc.strerror or exc}") from None


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _in_stage(stage: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except SwotError as exc:
        raise StageError(stage, exc) from exc


def _csv(value: str) -> list[str]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _int_csv(value: str) -> list[int]:
    try:
        items = [int(v) for v in _csv(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None
    if any(i <= 0 for i in items):
        raise argparse.ArgumentTypeError("values must be positive")
    return items


def _load_graphs(paths: list[str], stage: str) -> Graph:
    graphs = []
    for p in paths:
        text = _read(p, stage)
        try:
            graphs.append(parse_ntriples(text)[0])
        except SwotError as exc:
            raise StageError(stage, f"{p}: {exc}") from None
    return graphs[0] if len(graphs) == 1 else merge(Graph(), graphs)


# ---------------------------------------------------------------- commands


def cmd_template_find(args) -> int:
    registry = _in_stage("template", load_registry, args.registry)
    found = _in_stage("template", find_templates, registry, args.sensors, args.domain)
    if args.format == "json":
        _write(json.dumps([t.to_json() for t in found], indent=2, ensure_ascii=False) + "\n", None)
    elif not found:
        print("no matching templates")
    else:
        wanted = {s.casefold() for s in args.sensors}
        for t in found:
            print(f"{t.id}\t{len(t.sensors & wanted)}\t{t.title}")
    return 0


def cmd_template_list(args) -> int:
    registry = _in_stage("template", load_registry, args.registry)
    for t in registry.templates.values():
        print(f"{t.id}\t{','.join(sorted(t.sensors))}\t{','.join(sorted(t.domains))}\t{t.title}")
    return 0


def cmd_annotate(args) -> int:
    text = _read(args.input, "annotate")
    mapping = _in_stage("annotate", load_mapping, args.mapping) if args.mapping else default_mapping()
    pack = _in_stage("annotate", parse_senml, text)
    graph = _in_stage("annotate", annotate, pack, mapping)
    _write(serialize_ntriples(graph), args.out)
    return 0


def cmd_reason(args) -> int:
    graph = _load_graphs(args.graph, "reason")
    rules = []
    for p in args.rules:
        rules.extend(_in_stage("reason", parse_rules, _read(p, "reason")))
    closure, derivations = _in_stage("reason", saturate, graph, rules)
    _write(serialize_ntriples(closure), args.out)
    if args.explain:
        stream = sys.stdout if args.out not in (None, "-") else sys.stderr
        for d in derivations:
            bindings = " ".join(f"?{k}={v.n3()}" for k, v in d.bindings.items())
            stream.write(f"{d.triple.n3()}\t{d.rule}\t{bindings}\n")
    return 0


def cmd_query(args) -> int:
    graph = _load_graphs(args.graph, "query")
    query = _in_stage("query", parse_query, _read(args.query, "query"), Path(args.query).stem)
    table = execute(query, graph)
    _write(to_json(table) if args.format == "json" else to_tsv(table), args.out)
    return 0


def cmd_run(args) -> int:
    registry = _in_stage("template", load_registry, args.registry)
    bundle = _in_stage("template", registry.materialize, args.template)
    report = run_pipeline(bundle, _read(args.input, "annotate"))
    if args.format == "json":
        _write(report.to_json(timings=args.timings), None)
    else:
        text = render_text(report)
        if args.timings:
            text += "\ntimings (ms): " + ", ".join(f"{k}={v}" for k, v in report.timings.items()) + "\n"
        _write(text, None)
    return 0


def cmd_bench(args) -> int:
    registry = _in_stage("template", load_registry, args.registry)
    bundle = _in_stage("template", registry.materialize, args.template)
    table = benchmark(bundle, args.sizes, args.rules, base_size=args.base_size)
    _write(table.to_tsv(), args.out)
    return 0 if all(r["oracle"] != "FAIL" for r in table.rows) else 2


def cmd_serve(args) -> int:
    from .service import parse_address, serve

    try:
        parse_address(args.addr)
    except ValueError as exc:
        raise UsageError(f"serve: --addr: {exc}") from None
    registry = _in_stage("template", load_registry, args.registry)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    serve(registry, args.addr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swot", description="Prototype semantic IoT applications from SenML data.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    tpl = sub.add_parser("template", help="search the template registry")
    tsub = tpl.add_subparsers(dest="template_command", required=True, metavar="action")
    find = tsub.add_parser("find", help="templates matching sensors and a domain")
    find.add_argument("--sensors", type=_csv, required=True, help="comma-separated sensor tags")
    find.add_argument("--domain", required=True)
    find.add_argument("--registry", help="registry directory (default: the shipped one)")
    find.add_argument("--format", choices=("text", "json"), default="text")
    find.set_defaults(func=cmd_template_find)
    lst = tsub.add_parser("list", help="all templates")
    lst.add_argument("--registry")
    lst.set_defaults(func=cmd_template_list)

    ann = sub.add_parser("annotate", help="SenML JSON to N-Triples")
    ann.add_argument("--in", dest="input", required=True, help="SenML file, or - for stdin")
    ann.add_argument("--mapping", help="mappings.tsv (default: the shipped table)")
    ann.add_argument("--out")
    ann.set_defaults(func=cmd_annotate)

    rea = sub.add_parser("reason", help="forward-chaining closure of a graph")
    rea.add_argument("--graph", action="append", required=True)
    rea.add_argument("--rules", action="append", required=True)
    rea.add_argument("--out")
    rea.add_argument("--explain", action="store_true", help="also list each derived triple with its rule")
    rea.set_defaults(func=cmd_reason)

    qry = sub.add_parser("query", help="run a SPARQL SELECT query")
    qry.add_argument("--graph", action="append", required=True)
    qry.add_argument("--query", required=True)
    qry.add_argument("--format", choices=("tsv", "json"), default="tsv")
    qry.add_argument("--out")
    qry.set_defaults(func=cmd_query)

    run = sub.add_parser("run", help="whole pipeline for one template")
    run.add_argument("--template", required=True)
    run.add_argument("--in", dest="input", required=True)
    run.add_argument("--registry")
    run.add_argument("--format", choices=("text", "json"), default="text")
    run.add_argument("--timings", action="store_true")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="stage timings by data size and rule count")
    bench.add_argument("--sizes", type=_int_csv, default=[100, 1000])
    bench.add_argument("--rules", type=_int_csv, default=[1, 5, 10])
    bench.add_argument("--template", default="naturopathy")
    bench.add_argument("--registry")
    bench.add_argument("--base-size", type=int, default=50)
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_bench)

    srv = sub.add_parser("serve", help="HTTP API")
    srv.add_argument("--addr", default="127.0.0.1:8080")
    srv.add_argument("--registry")
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print("run 'swot --help' for usage", file=sys.stderr)
        return 1
    except SwotError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
