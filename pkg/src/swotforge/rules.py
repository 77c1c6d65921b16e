"""Forward-chaining rules: parser for the ``[name: body -> head]`` syntax and a
semi-naive fixpoint engine.

Example rule file::

    @prefix m3: <http://swot-forge.local/m3#>.
    [fever: (?m rdf:type m3:BodyThermometer) (?m m3:hasValue ?v)
            greaterThan(?v, 37.5) lessThan(?v, 39)
            -> (?m rdf:type m3:HighFever)]
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

from ._scan import Scanner, read_prefix_decl, read_term
from .errors import ParseError, RuleError
from .rdf import (
    DEFAULT_PREFIXES,
    Blank,
    Graph,
    Iri,
    Literal,
    Pattern,
    Term,
    TermOrVar,
    Triple,
    Var,
    fmt_arg,
    numeric_value,
    promote,
)

_NUMERIC_OPS = {"greaterThan": operator.gt, "lessThan": operator.lt}
BUILTINS = frozenset({"greaterThan", "lessThan", "equal", "notEqual"})


@dataclass(frozen=True)
class Builtin:
    name: str
    args: tuple[TermOrVar, ...]

    def variables(self) -> list[str]:
        return [x.name for x in self.args if isinstance(x, Var)]

    def __str__(self) -> str:
        return f"{self.name}({', '.join(fmt_arg(a) for a in self.args)})"


RuleAtom = Union[Pattern, Builtin]


@dataclass(frozen=True)
class Rule:
    name: str
    body: tuple[RuleAtom, ...]
    head: tuple[Pattern, ...]

    def __post_init__(self):
        problem = validate_rule(self.name, self.body, self.head)
        if problem:
            raise RuleError(f"rule {self.name}: {problem[0]}")

    @property
    def patterns(self) -> list[Pattern]:
        return [a for a in self.body if isinstance(a, Pattern)]

    @property
    def builtins(self) -> list[Builtin]:
        return [a for a in self.body if isinstance(a, Builtin)]

    def __str__(self) -> str:
        body = " ".join(map(str, self.body))
        head = " ".join(map(str, self.head))
        return f"[{self.name}: {body} -> {head}]"


def validate_rule(name, body, head) -> tuple[str, int | None] | None:
    """First rule-invariant violation as ``(message, atom index)``, or ``None``."""
    if not body:
        return "empty body", None
    if not head:
        return "empty head", None
    bound: set[str] = set()
    for i, atom in enumerate(body):
        if isinstance(atom, Pattern):
            bound.update(atom.variables())
        elif isinstance(atom, Builtin):
            if atom.name not in BUILTINS:
                return f"unknown builtin: {atom.name}", i
            if len(atom.args) != 2:
                return f"builtin {atom.name} takes 2 arguments, got {len(atom.args)}", i
            unbound = [v for v in atom.variables() if v not in bound]
            if unbound:
                return f"builtin {atom} uses ?{unbound[0]} before any pattern binds it", i
        else:
            return f"bad body atom {atom!r}", i
    for j, atom in enumerate(head):
        if not isinstance(atom, Pattern):
            return "only triple patterns may appear in a rule head", len(body) + j
        if isinstance(atom.subject, Literal):
            return f"literal subject in head pattern {atom}", len(body) + j
        if not isinstance(atom.predicate, (Iri, Var)):
            return f"head predicate must be an IRI or variable in {atom}", len(body) + j
        free = [v for v in atom.variables() if v not in bound]
        if free:
            return f"head variable ?{free[0]} does not occur in the body (range restriction)", len(body) + j
    return None


# ---------------------------------------------------------------- parser


def parse_rules(text: str, prefixes: dict[str, str] | None = None) -> list[Rule]:
    """Parse a rule file. ``rdf``, ``rdfs``, ``xsd``, ``owl``, ``m3`` and ``nat`` are predeclared."""
    sc = Scanner(text)
    ns = dict(DEFAULT_PREFIXES if prefixes is None else prefixes)
    rules: list[Rule] = []
    names: set[str] = set()
    while True:
        sc.skip_ws()
        if sc.at_end():
            return rules
        if sc.startswith("@prefix"):
            sc.advance(len("@prefix"))
            sc.skip_ws()
            label, iri = read_prefix_decl(sc)
            sc.skip_ws()
            sc.expect(".", "'.' ending the @prefix directive")
            ns[label] = iri
        elif sc.peek() == "[":
            start = sc.mark()
            rule = _parse_rule(sc, ns, len(rules))
            if rule.name in names:
                raise ParseError(f"duplicate rule name: {rule.name}", *start)
            names.add(rule.name)
            rules.append(rule)
        else:
            raise sc.error(f"expected '[' or @prefix, found {sc.peek()!r}")


def _parse_rule(sc: Scanner, ns: dict[str, str], index: int) -> Rule:
    start = sc.mark()
    sc.advance()
    sc.skip_ws()
    if sc.peek() == "(":
        name = f"rule{index + 1}"
    else:
        name = sc.read_name()
        if not name:
            raise sc.error("expected a rule name or '('")
        sc.skip_ws()
        sc.expect(":", "':' after the rule name")
    body, body_marks = _parse_atoms(sc, ns, "->")
    sc.advance(2)
    head, head_marks = _parse_atoms(sc, ns, "]")
    sc.advance()
    problem = validate_rule(name, tuple(body), tuple(head))
    if problem:
        message, idx = problem
        marks = body_marks + head_marks
        where = marks[idx] if idx is not None else start
        raise ParseError(f"{message} (rule {name!r})", *where)
    return Rule(name, tuple(body), tuple(head))


def _parse_atoms(sc: Scanner, ns: dict[str, str], stop: str):
    atoms, marks = [], []
    while True:
        sc.skip_ws()
        if sc.startswith(stop):
            return atoms, marks
        if sc.at_end():
            raise sc.error(f"unexpected end of input, expected {stop!r}")
        marks.append(sc.mark())
        if sc.peek() == "(":
            atoms.append(_parse_pattern(sc, ns))
        elif sc.peek().isalpha():
            atoms.append(_parse_builtin(sc, ns))
        else:
            raise sc.error(f"expected a triple pattern, builtin or {stop!r}, found {sc.peek()!r}")


def _parse_pattern(sc: Scanner, ns: dict[str, str]) -> Pattern:
    sc.advance()
    parts = []
    for i in range(3):
        sc.skip_ws()
        if sc.peek() == ")":
            raise sc.error("triple pattern needs exactly 3 terms")
        parts.append(read_term(sc, ns, variables=True, allow_a=i == 1))
    sc.skip_ws()
    if sc.peek() != ")":
        raise sc.error("expected ')' closing the triple pattern")
    sc.advance()
    return Pattern(*parts)


def _parse_builtin(sc: Scanner, ns: dict[str, str]) -> Builtin:
    name = sc.read_name()
    sc.skip_ws()
    sc.expect("(", f"'(' after builtin {name}")
    args = []
    while True:
        sc.skip_ws()
        if sc.peek() == ")":
            sc.advance()
            return Builtin(name, tuple(args))
        if args:
            if sc.peek() == ",":
                sc.advance()
                sc.skip_ws()
        args.append(read_term(sc, ns, variables=True))


def load_rules(path) -> list[Rule]:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh.read())


# ---------------------------------------------------------------- engine


@dataclass(frozen=True)
class Derivation:
    triple: Triple
    rule: str
    bindings: dict[str, Term] = field(hash=False)
    round: int = 0


def check_builtin(b: Builtin, binding: dict[str, Term], rule_name: str) -> bool:
    values = []
    for arg in b.args:
        if isinstance(arg, Var):
            if arg.name not in binding:
                raise RuleError(f"rule {rule_name}: {b}: unbound variable ?{arg.name}")
            values.append(binding[arg.name])
        else:
            values.append(arg)
    nums = [numeric_value(v) for v in values]
    if b.name in _NUMERIC_OPS:
        for v, n in zip(values, nums):
            if n is None:
                raise RuleError(f"rule {rule_name}: {b}: non-numeric argument {v.n3()}")
        return _NUMERIC_OPS[b.name](*promote(nums[0], nums[1]))
    if nums[0] is not None and nums[1] is not None:
        a, c = promote(nums[0], nums[1])
        same = a == c
    else:
        same = values[0] == values[1]
    return same if b.name == "equal" else not same


def _resolve(x: TermOrVar, binding: dict[str, Term]):
    return binding.get(x.name) if isinstance(x, Var) else x


def _unify(pattern: Pattern, t: Triple, binding: dict[str, Term]) -> dict[str, Term] | None:
    out = binding
    for x, value in zip(pattern, t):
        if isinstance(x, Var):
            have = out.get(x.name)
            if have is None:
                if out is binding:
                    out = dict(binding)
                out[x.name] = value
            elif have != value:
                return None
        elif x != value:
            return None
    return out


def _bound_positions(pattern: Pattern, bound: set[str]) -> int:
    return sum(1 for x in pattern if not isinstance(x, Var) or x.name in bound)


def _solve(sources: list[tuple[Pattern, Graph]], binding: dict[str, Term]) -> Iterator[dict[str, Term]]:
    """Join ``sources`` (each pattern with the graph it must match) under ``binding``.

    Greedy ordering: next comes the pattern with the most bound positions.
    """
    if not sources:
        yield binding
        return
    bound = set(binding)
    best = max(range(len(sources)), key=lambda k: (_bound_positions(sources[k][0], bound), -k))
    pattern, graph = sources[best]
    rest = sources[:best] + sources[best + 1:]
    s, p, o = (_resolve(x, binding) for x in pattern)
    for t in graph.match(s, p, o):
        extended = _unify(pattern, t, binding)
        if extended is not None:
            yield from _solve(rest, extended)


def _passes(rule: Rule, binding: dict[str, Term]) -> bool:
    # builtins run on complete pattern matches only, in body order, so whether
    # a rule errors never depends on join order or evaluation strategy
    return all(check_builtin(b, binding, rule.name) for b in rule.builtins)


def instantiate(head: Iterable[Pattern], binding: dict[str, Term]) -> Iterator[Triple]:
    """Ground head triples; instances that are not valid RDF (e.g. literal subject) are dropped."""
    for pat in head:
        s, p, o = (_resolve(x, binding) for x in pat)
        if isinstance(s, (Iri, Blank)) and isinstance(p, Iri):
            yield Triple(s, p, o)


def saturate(graph: Graph, rules: Iterable[Rule]) -> tuple[Graph, list[Derivation]]:
    """Semi-naive least fixpoint.

    Round 1 evaluates every rule against the input.  Each later round evaluates,
    for every body pattern in turn, that pattern against the triples derived in
    the previous round and the other patterns against the whole graph.  Triples
    derived in a round become visible at the end of the round.
    """
    rules = list(rules)
    full = graph.copy()
    derivations: list[Derivation] = []
    delta: Graph | None = None
    rnd = 0
    while True:
        rnd += 1
        new: dict[Triple, Derivation] = {}
        for rule in rules:
            patterns = rule.patterns
            if delta is None:
                plans = [[(p, full) for p in patterns]]
            else:
                plans = [
                    [(p, delta if j == i else full) for j, p in enumerate(patterns)]
                    for i in range(len(patterns))
                ]
            for plan in plans:
                for binding in _solve(plan, {}):
                    if not _passes(rule, binding):
                        continue
                    for t in instantiate(rule.head, binding):
                        if t not in full and t not in new:
                            new[t] = Derivation(t, rule.name, binding, rnd)
        if not new:
            return full, derivations
        full.update(new)
        derivations.extend(new.values())
        delta = Graph(new)


def infer(graph: Graph, rules: Iterable[Rule]) -> Graph:
    return saturate(graph, rules)[0]


def explain(graph: Graph, rules: Iterable[Rule]) -> list[tuple[Triple, str, dict[str, Term]]]:
    return [(d.triple, d.rule, d.bindings) for d in saturate(graph, rules)[1]]
