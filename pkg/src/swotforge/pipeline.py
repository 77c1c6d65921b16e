"""End-to-end workflow: annotate -> merge -> infer -> query -> report."""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from .errors import StageError, SwotError
from .oracle import naive_closure
from .rdf import DEFAULT_PREFIXES, Graph, Iri, Literal, PrefixMap, Triple, local_name, merge
from .registry import TemplateBundle
from .rules import Derivation, parse_rules, saturate
from .senml import annotate, parse_senml
from .sparql import execute, lang_matches

STAGES = ("annotate", "merge", "infer", "query")


@dataclass
class SuggestionRow:
    query_id: str
    bindings: dict[str, str]
    human_label: str | None = None

    def to_dict(self) -> dict:
        return {"queryId": self.query_id, "bindings": self.bindings, "humanLabel": self.human_label}


@dataclass
class PipelineReport:
    template_id: str
    input_record_count: int
    annotated_triple_count: int
    derived_triple_count: int
    suggestions: list[SuggestionRow]
    derivations: list[tuple[Triple, str]]
    timings: dict[str, float] = field(default_factory=dict, compare=False)

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "templateId": self.template_id,
            "inputRecordCount": self.input_record_count,
            "annotatedTripleCount": self.annotated_triple_count,
            "derivedTripleCount": self.derived_triple_count,
            "suggestions": [s.to_dict() for s in self.suggestions],
            "derivations": [{"triple": t.n3(), "rule": rule} for t, rule in self.derivations],
        }
        if timings:
            out["timings"] = self.timings
        return out

    def to_json(self, timings: bool = False) -> str:
        """Report as JSON. Timings are left out by default so output is byte-stable."""
        return json.dumps(self.to_dict(timings), indent=2, ensure_ascii=False) + "\n"


class _Clock:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter_ns()
        try:
            yield
        except StageError:
            raise
        except SwotError as exc:
            raise StageError(name, exc) from exc
        finally:
            # milliseconds at microsecond resolution
            self.timings[name] = round((time.perf_counter_ns() - start) / 1e6, 3)


def human_label(row: dict) -> str | None:
    for term in row.values():
        if isinstance(term, Literal) and term.lang and lang_matches(term.lang, "en"):
            return term.lexical
    iris = [t for t in row.values() if isinstance(t, Iri)]
    return local_name(iris[-1].value) if iris else None


@dataclass
class _Run:
    report: PipelineReport
    annotated: Graph
    merged: Graph
    closure: Graph
    derivations: list[Derivation]


def _run(bundle: TemplateBundle, senml_text: str) -> _Run:
    clock = _Clock()
    with clock.stage("annotate"):
        if not senml_text or not senml_text.strip():
            raise StageError("annotate", "empty input")
        pack = parse_senml(senml_text)
        annotated = annotate(pack, bundle.mapping)
    with clock.stage("merge"):
        merged = merge(Graph(), [bundle.ontology, bundle.dataset, annotated])
    with clock.stage("infer"):
        closure, derivations = saturate(merged, bundle.rules)
    with clock.stage("query"):
        suggestions = []
        for query in bundle.queries:
            table = execute(query, closure)
            for row in table.rows:
                if not row:
                    continue
                bindings = {var: row[var].n3() for var in table.header if var in row}
                suggestions.append(SuggestionRow(query.name, bindings, human_label(row)))
    report = PipelineReport(
        template_id=bundle.template.id,
        input_record_count=len(pack),
        annotated_triple_count=len(annotated),
        derived_triple_count=len(closure) - len(merged),
        suggestions=suggestions,
        derivations=[(d.triple, d.rule) for d in derivations],
        timings=clock.timings,
    )
    return _Run(report, annotated, merged, closure, derivations)


def run_pipeline(bundle: TemplateBundle, senml_text: str) -> PipelineReport:
    """Run all stages; failures surface as :class:`StageError` tagged with the stage name."""
    return _run(bundle, senml_text).report


_DISPLAY = PrefixMap(dict(DEFAULT_PREFIXES))


def _short(n3: str) -> str:
    if n3.startswith("<") and n3.endswith(">"):
        return _DISPLAY.shrink(n3[1:-1])
    return n3


def render_text(report: PipelineReport) -> str:
    """Plain-text report for terminals."""
    lines = [
        f"template {report.template_id}: {report.input_record_count} record(s), "
        f"{report.annotated_triple_count} annotated triple(s), "
        f"{report.derived_triple_count} derived triple(s)",
        "",
        "derived knowledge:",
    ]
    if not report.derivations:
        lines.append("  (none)")
    for t, rule in report.derivations:
        lines.append(f"  {_short(t.subject.n3())} {_short(t.predicate.n3())} {_short(t.object.n3())}  [{rule}]")
    lines += ["", "suggestions:"]
    if not report.suggestions:
        lines.append("  (none)")
    for s in report.suggestions:
        shown = ", ".join(f"{k}={_short(v)}" for k, v in s.bindings.items())
        lines.append(f"  {s.human_label or '-'}  ({s.query_id}: {shown})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- benchmark

BENCH_NS = "http://swot-forge.local/bench#"
BENCH_COLUMNS = (
    "kind", "n", "records", "annotated_triples", "derived_triples",
    "annotate_ms", "merge_ms", "infer_ms", "query_ms", "oracle",
)


def synth_senml(n: int, name: str = "bodyTemperature", unit: str = "Cel") -> str:
    """Deterministic pack of ``n`` time-stamped readings sweeping 36.0-40.9."""
    records = [{"bn": "bench/", "bt": 1_700_000_000, "bu": unit, "n": name, "v": 36.0, "t": 0}]
    for i in range(1, n):
        records.append({"n": name, "v": round(36.0 + (i * 37 % 50) / 10, 1), "t": i})
    return json.dumps(records)


def threshold_rules(k: int, sensor_class: str = "m3:BodyThermometer"):
    """``k`` copies of a threshold rule, each writing a fresh predicate."""
    lines = [f"@prefix bench: <{BENCH_NS}>."]
    for i in range(k):
        threshold = 36.0 + (i % 10) * 0.5
        lines.append(
            f"[above{i}: (?m rdf:type {sensor_class}) (?m m3:hasValue ?v) "
            f"greaterThan(?v, {threshold}) -> (?m bench:above{i} bench:Flag)]"
        )
    return parse_rules("\n".join(lines))


@dataclass
class BenchmarkTable:
    columns: tuple[str, ...] = BENCH_COLUMNS
    rows: list[dict] = field(default_factory=list)

    def to_tsv(self) -> str:
        out = ["\t".join(self.columns)]
        for row in self.rows:
            out.append("\t".join(str(row.get(c, "")) for c in self.columns))
        return "\n".join(out) + "\n"


def benchmark(bundle: TemplateBundle, sizes, rule_counts, base_size: int = 50) -> BenchmarkTable:
    """Per-stage wall time by input size, and inference time by rule count.

    Rule-count rows also recompute the closure with the naive oracle and
    record whether the two agree.
    """
    sizes, rule_counts = list(sizes), list(rule_counts)
    if not sizes and not rule_counts:
        raise ValueError("nothing to benchmark")
    table = BenchmarkTable()
    for n in sizes:
        run = _run(bundle, synth_senml(n))
        t = run.report.timings
        table.rows.append({
            "kind": "size", "n": n, "records": run.report.input_record_count,
            "annotated_triples": run.report.annotated_triple_count,
            "derived_triples": run.report.derived_triple_count,
            "annotate_ms": t["annotate"], "merge_ms": t["merge"],
            "infer_ms": t["infer"], "query_ms": t["query"], "oracle": "-",
        })
    if rule_counts:
        base = _run(bundle, synth_senml(base_size))
        for k in rule_counts:
            rules = threshold_rules(k)
            start = time.perf_counter_ns()
            closure = saturate(base.merged, rules)[0]
            infer_ms = round((time.perf_counter_ns() - start) / 1e6, 3)
            ok = set(closure) == naive_closure(base.merged, rules)
            table.rows.append({
                "kind": "rules", "n": k, "records": base.report.input_record_count,
                "annotated_triples": base.report.annotated_triple_count,
                "derived_triples": len(closure) - len(base.merged),
                "annotate_ms": "", "merge_ms": "", "infer_ms": infer_ms, "query_ms": "",
                "oracle": "ok" if ok else "FAIL",
            })
    return table
