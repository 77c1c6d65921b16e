import random

import pytest
from hypothesis import assume, given, settings, strategies as st

from swotforge.errors import ParseError, RuleError
from swotforge.ntriples import parse_ntriples
from swotforge.oracle import naive_closure
from swotforge.rdf import M3, XSD, Blank, RDF_TYPE, XSD_DECIMAL, XSD_DOUBLE, Graph, Iri, Literal, Pattern, Triple, Var
from swotforge.rules import Builtin, Rule, explain, infer, load_rules, parse_rules, saturate

from generators import random_rule_graph, random_rules_text

FEVER = """[fever: (?m rdf:type m3:BodyThermometer) (?m m3:hasValue ?v)
  greaterThan(?v, 37.5) lessThan(?v, 39) -> (?m rdf:type m3:HighFever)]"""

OBS = Iri("urn:obs:1")


def reading(value: str) -> Graph:
    g, _ = parse_ntriples(
        f"@prefix m3: <{M3}> .\n@prefix xsd: <{XSD}> .\n"
        f'<urn:obs:1> a m3:BodyThermometer .\n<urn:obs:1> m3:hasValue "{value}"^^xsd:double .\n'
    )
    return g


# ---------------------------------------------------------------- parsing


def test_parse_fever_rule():
    (rule,) = parse_rules(FEVER)
    assert rule.name == "fever"
    assert len(rule.body) == 4 and len(rule.head) == 1
    assert [b.name for b in rule.builtins] == ["greaterThan", "lessThan"]
    assert [b.args[1] for b in rule.builtins] == [Literal("37.5", XSD_DECIMAL), Literal("39", rule.builtins[1].args[1].datatype)]
    assert rule.head[0] == Pattern(Var("m"), RDF_TYPE, Iri(M3 + "HighFever"))


def test_parse_empty_file():
    assert parse_rules("") == []
    assert parse_rules("# only a comment\n\n") == []


def test_anonymous_rules_get_names():
    rules = parse_rules("[(?a <urn:p> ?b) -> (?b <urn:p> ?a)]\n[(?a <urn:q> ?b) -> (?a <urn:p> ?b)]")
    assert [r.name for r in rules] == ["rule1", "rule2"]


def test_parse_prefix_and_comma_free_builtin():
    (rule,) = parse_rules("@prefix ex: <http://ex/>.\n[r: (?a ex:v ?x) lessThan(?x 3) -> (?a a ex:Small)]")
    assert rule.builtins[0].args[0] == Var("x")
    assert rule.head[0].object == Iri("http://ex/Small")


@pytest.mark.parametrize(
    "text, message, line, column",
    [
        ("[r: (?m m3:hasValue ?v) between(?v, 1, 2) -> (?m a m3:X)]", "unknown builtin: between", 1, 25),
        ("[r: (?m m3:hasValue ?v)\n -> (?m a ?z)]", "head variable ?z does not occur in the body", 2, 5),
        ("[r: (?m m3:hasValue ?v) -> (?m a m3:X)", "expected ']'", 1, 39),
        ("[r: (?m m3:hasValue ?v) greaterThan(?w, 1) -> (?m a m3:X)]", "?w", 1, 25),
        ("[r: (?m m3:hasValue ?v) -> (?m a m3:X)]\n[r: (?m a m3:X) -> (?m a m3:Y)]", "duplicate rule name", 2, 1),
        ("[r: (?m m3:hasValue) -> (?m a m3:X)]", "", 1, None),
        ("[r: (?m nope:p ?v) -> (?m a m3:X)]", "nope", 1, None),
        ("[r: -> (<urn:a> a m3:X)]", "empty body", 1, None),
    ],
)
def test_parse_errors_carry_position(text, message, line, column):
    with pytest.raises(ParseError) as exc:
        parse_rules(text)
    assert message in str(exc.value)
    assert exc.value.line == line
    if column is not None:
        assert exc.value.column == column


def test_unknown_builtin_message():
    with pytest.raises(ParseError, match=r"unknown builtin: between"):
        parse_rules("[r: (?m m3:hasValue ?v) between(?v, 37.5, 39) -> (?m a m3:HighFever)]")


def test_load_rules_shipped_file(registry):
    rules = load_rules(registry.root / "rules" / "health.rules")
    assert [r.name for r in rules][:1] == ["fever"]


def test_rule_object_validates():
    with pytest.raises(RuleError):
        Rule("bad", (Pattern(Var("a"), RDF_TYPE, Var("b")),), (Pattern(Var("a"), RDF_TYPE, Var("c")),))
    pat = Pattern(Var("a"), RDF_TYPE, Var("b"))
    with pytest.raises(RuleError, match="unknown builtin"):
        Rule("bad", (pat, Builtin("between", (Var("a"), Var("b")))), (pat,))


# ---------------------------------------------------------------- inference


def test_fever_fires():
    g = reading("38.2")
    closure = infer(g, parse_rules(FEVER))
    assert len(closure) == len(g) + 1
    assert Triple(OBS, RDF_TYPE, Iri(M3 + "HighFever")) in closure


@pytest.mark.parametrize("value", ["37.5", "39", "36.6", "39.4"])
def test_fever_bounds_are_strict(value):
    g = reading(value)
    assert set(infer(g, parse_rules(FEVER))) == set(g)


def test_input_graph_untouched():
    g = reading("38.2")
    before = set(g)
    infer(g, parse_rules(FEVER))
    assert set(g) == before


def test_empty_rule_set_is_identity():
    g = reading("38.2")
    assert set(infer(g, [])) == set(g)


def test_chained_rules_need_two_rounds():
    rules = parse_rules(
        FEVER + "\n[alert: (?m rdf:type m3:HighFever) -> (?m m3:needs m3:Attention)]"
    )
    closure, derivations = saturate(reading("38.2"), rules)
    assert Triple(OBS, Iri(M3 + "needs"), Iri(M3 + "Attention")) in closure
    assert [(d.rule, d.round) for d in derivations] == [("fever", 1), ("alert", 2)]


def test_recursive_rule_reaches_fixpoint():
    g, _ = parse_ntriples("".join(f"<urn:n{i}> <urn:next> <urn:n{i + 1}> .\n" for i in range(8)))
    rules = parse_rules(
        "[base: (?a <urn:next> ?b) -> (?a <urn:reach> ?b)]\n"
        "[step: (?a <urn:reach> ?b) (?b <urn:next> ?c) -> (?a <urn:reach> ?c)]"
    )
    closure = infer(g, rules)
    assert len(closure.match(None, Iri("urn:reach"), None)) == 9 * 8 // 2


def test_explain_fever():
    result = explain(reading("38.2"), parse_rules(FEVER))
    assert result == [
        (Triple(OBS, RDF_TYPE, Iri(M3 + "HighFever")), "fever",
         {"m": OBS, "v": Literal("38.2", XSD_DOUBLE)}),
    ]


def test_explain_skips_triples_already_present():
    g = reading("38.2")
    g.add(Triple(OBS, RDF_TYPE, Iri(M3 + "HighFever")))
    assert explain(g, parse_rules(FEVER)) == []


def test_non_numeric_comparison_is_a_runtime_error():
    g, _ = parse_ntriples(f'@prefix m3: <{M3}> .\n<urn:obs:1> a m3:BodyThermometer .\n<urn:obs:1> m3:hasValue "warm" .\n')
    with pytest.raises(RuleError, match="fever.*non-numeric"):
        infer(g, parse_rules(FEVER))


def test_equal_compares_numbers_by_value():
    g, _ = parse_ntriples(f'<urn:a> <urn:v> "39.0"^^<{XSD}double> .\n<urn:b> <urn:v> 39 .\n<urn:c> <urn:v> "x" .\n')
    rules = parse_rules('[r: (?s <urn:v> ?x) equal(?x, 39) -> (?s a <urn:Hit>)]')
    hits = {t.subject for t in infer(g, rules).match(None, RDF_TYPE, Iri("urn:Hit"))}
    assert hits == {Iri("urn:a"), Iri("urn:b")}


def test_double_meets_decimal_constant_by_value():
    g = reading("38.2")
    at = parse_rules("[r: (?m m3:hasValue ?v) equal(?v, 38.2) -> (?m a m3:At)]")
    above = parse_rules("[r: (?m m3:hasValue ?v) greaterThan(?v, 38.2) -> (?m a m3:Above)]")
    assert len(infer(g, at)) == len(g) + 1
    assert len(infer(g, above)) == len(g)


def test_literal_subject_instances_are_dropped():
    g, _ = parse_ntriples('<urn:a> <urn:v> "x" .\n')
    rules = parse_rules("[r: (?s <urn:v> ?x) -> (?x <urn:of> ?s) (?s <urn:seen> <urn:yes>)]")
    closure = infer(g, rules)
    assert set(closure) - set(g) == {Triple(Iri("urn:a"), Iri("urn:seen"), Iri("urn:yes"))}


def test_shipped_health_rules_on_fever(bundle):
    g = reading("39.7")
    g.update(bundle.dataset)
    closure = infer(g, bundle.rules)
    assert Triple(OBS, RDF_TYPE, Iri(M3 + "VeryHighFever")) in closure
    assert Triple(OBS, RDF_TYPE, Iri(M3 + "HighFever")) not in closure


# ---------------------------------------------------------------- properties

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _instance(seed):
    rnd = random.Random(seed)
    return rnd, random_rule_graph(rnd), parse_rules(random_rules_text(rnd))


def _closure_or_error(graph, rules):
    try:
        return set(infer(graph, rules))
    except RuleError:
        return "error"


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_matches_naive_oracle(seed):
    _, g, rules = _instance(seed)
    try:
        expected = naive_closure(g, rules)
    except RuleError:
        expected = "error"
    assert _closure_or_error(g, rules) == expected


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_closure_contains_input_and_is_idempotent(seed):
    _, g, rules = _instance(seed)
    closure = _closure_or_error(g, rules)
    assume(closure != "error")
    closure = Graph(closure)
    assert set(g) <= set(closure)
    again, derivations = saturate(closure, rules)
    assert derivations == [] and set(again) == set(closure)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_monotone(seed):
    rnd, g, rules = _instance(seed)
    bigger = g.copy()
    bigger.update(random_rule_graph(rnd, max_triples=15))
    small, large = _closure_or_error(g, rules), _closure_or_error(bigger, rules)
    if small == "error":
        # a failing match in g is still a match in the bigger graph
        assert large == "error"
    elif large != "error":
        assert small <= large


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_independent_of_rule_and_triple_order(seed):
    rnd, g, rules = _instance(seed)
    triples = list(g)
    rnd.shuffle(triples)
    shuffled_rules = list(rules)
    rnd.shuffle(shuffled_rules)
    assert _closure_or_error(Graph(triples), shuffled_rules) == _closure_or_error(g, rules)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_derivations_are_justified(seed):
    _, g, rules = _instance(seed)
    by_name = {r.name: r for r in rules}
    assume(_closure_or_error(g, rules) != "error")
    closure, derivations = saturate(g, rules)
    assert len(closure) == len(g) + len(derivations)
    for d in derivations:
        rule = by_name[d.rule]
        ground = lambda x: d.bindings[x.name] if isinstance(x, Var) else x  # noqa: E731
        assert d.triple in {Triple(*map(ground, p)) for p in rule.head if isinstance(ground(p.subject), (Iri, Blank))}
        for p in rule.patterns:
            assert Triple(*map(ground, p)) in closure


def test_both_engines_raise_on_bad_builtin_input():
    g, _ = parse_ntriples('<urn:a> <urn:v> <urn:b> .\n')
    rules = parse_rules("[r: (?s <urn:v> ?x) greaterThan(?x, 1) -> (?s a <urn:Big>)]")
    with pytest.raises(RuleError):
        infer(g, rules)
    with pytest.raises(RuleError):
        naive_closure(g, rules)
