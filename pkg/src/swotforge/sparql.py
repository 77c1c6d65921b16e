"""A small SPARQL SELECT engine.

Supported: ``PREFIX``, ``SELECT [DISTINCT] ?v+ | *``, ``WHERE { ... }`` with
triple patterns (``;`` and ``,`` abbreviations, ``a``), ``OPTIONAL { ... }``
and ``FILTER`` over comparisons, ``&&``/``||``/``!``, ``lang``,
``langMatches`` and ``str``.  Anything else fails to parse with a message
naming the unsupported keyword.
"""

from __future__ import annotations

import json
import operator
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from ._scan import Scanner, read_prefix_decl, read_term
from .errors import ParseError
from .rdf import (
    DEFAULT_PREFIXES,
    XSD_BOOLEAN,
    XSD_STRING,
    Blank,
    Graph,
    Iri,
    Literal,
    Pattern,
    PrefixMap,
    Term,
    Var,
    numeric_value,
    promote,
)

UNSUPPORTED = frozenset("""
    ASK CONSTRUCT DESCRIBE INSERT DELETE LOAD CLEAR DROP CREATE WITH USING
    UNION MINUS GRAPH SERVICE BIND VALUES EXISTS NOT FROM NAMED BASE REDUCED
    GROUP ORDER BY HAVING LIMIT OFFSET AS
    BOUND REGEX CONTAINS STRSTARTS STRENDS STRLEN SUBSTR UCASE LCASE CONCAT
    DATATYPE ISIRI ISURI ISBLANK ISLITERAL ISNUMERIC SAMETERM IF COALESCE IN
    COUNT SUM MIN MAX AVG SAMPLE GROUP_CONCAT
""".split())

FUNCTIONS = {"lang": 1, "langmatches": 2, "str": 1}
_COMPARE = {
    "<": operator.lt, "<=": operator.le, ">": operator.gt,
    ">=": operator.ge, "=": operator.eq, "!=": operator.ne,
}
_WORD = re.compile(r"[A-Za-z_]\w*")


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    term: Term


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class Call:
    name: str  # lower-cased
    args: tuple["Expr", ...]


Expr = Union[Const, Var, Compare, And, Or, Not, Call]


@dataclass
class GroupPattern:
    triples: list[Pattern] = field(default_factory=list)
    optionals: list["GroupPattern"] = field(default_factory=list)
    filters: list[Expr] = field(default_factory=list)

    def variables(self) -> list[str]:
        """Variables of all triple patterns, nested optionals included, in first-seen order."""
        seen: dict[str, None] = {}
        for t in self.triples:
            seen.update(dict.fromkeys(t.variables()))
        for opt in self.optionals:
            seen.update(dict.fromkeys(opt.variables()))
        return list(seen)


@dataclass
class Query:
    prefixes: PrefixMap
    select: list[str]
    distinct: bool
    pattern: GroupPattern
    name: str = ""


# ---------------------------------------------------------------- parser


def parse_query(text: str, name: str = "") -> Query:
    sc = Scanner(text)
    ns = dict(DEFAULT_PREFIXES)
    declared = PrefixMap()
    while True:
        sc.skip_ws()
        if sc.keyword("PREFIX"):
            sc.skip_ws()
            label, iri = read_prefix_decl(sc)
            ns[label] = iri
            declared.mapping[label] = iri
            continue
        break
    _reject_unsupported(sc)
    if not sc.keyword("SELECT"):
        raise sc.error("expected SELECT")
    sc.skip_ws()
    distinct = sc.keyword("DISTINCT")
    sc.skip_ws()
    _reject_unsupported(sc)
    select: list[tuple[str, tuple[int, int]]] = []
    star = False
    if sc.peek() == "*":
        sc.advance()
        star = True
    else:
        while sc.peek() in ("?", "$") and sc.peek():
            where = sc.mark()
            var = read_term(sc, ns, variables=True)
            select.append((var.name, where))
            sc.skip_ws()
        if not select:
            if sc.peek() == "(":
                raise sc.error("unsupported: expressions in SELECT")
            raise sc.error("expected at least one variable after SELECT")
    sc.skip_ws()
    _reject_unsupported(sc)
    sc.keyword("WHERE")
    sc.skip_ws()
    if sc.peek() != "{":
        raise sc.error("expected '{' opening the WHERE clause")
    pattern = _parse_group(sc, ns)
    sc.skip_ws()
    if not sc.at_end():
        _reject_unsupported(sc)
        raise sc.error(f"unexpected {sc.peek()!r} after the WHERE clause")

    in_pattern = pattern.variables()
    if star:
        names = in_pattern
        if not names:
            raise sc.error("SELECT * over a pattern without variables")
    else:
        names = []
        for var, where in select:
            if var not in in_pattern:
                raise ParseError(f"unbound select variable ?{var}", *where)
            if var not in names:
                names.append(var)
    return Query(declared, names, distinct, pattern, name)


def _reject_unsupported(sc: Scanner) -> None:
    m = _WORD.match(sc.text, sc.pos)
    if m and m.group(0).upper() in UNSUPPORTED:
        end = m.end()
        if end < len(sc.text) and sc.text[end] == ":":
            return  # a prefixed name such as order:x
        raise sc.error(f"unsupported keyword: {m.group(0).upper()}")


def _parse_group(sc: Scanner, ns: dict[str, str]) -> GroupPattern:
    sc.expect("{")
    group = GroupPattern()
    while True:
        sc.skip_ws()
        if sc.at_end():
            raise sc.error("unexpected end of input, expected '}'")
        if sc.peek() == "}":
            sc.advance()
            return group
        if sc.peek() == ".":
            # tolerated after OPTIONAL / FILTER blocks
            sc.advance()
            continue
        _reject_unsupported(sc)
        if sc.keyword("OPTIONAL"):
            sc.skip_ws()
            if sc.peek() != "{":
                raise sc.error("expected '{' after OPTIONAL")
            group.optionals.append(_parse_group(sc, ns))
        elif sc.keyword("FILTER"):
            sc.skip_ws()
            if sc.peek() == "(":
                sc.advance()
                expr = _parse_or(sc, ns)
                sc.skip_ws()
                sc.expect(")", "')' closing FILTER")
            else:
                expr = _parse_primary(sc, ns)
                if not isinstance(expr, Call):
                    raise sc.error("FILTER needs a parenthesised expression")
            group.filters.append(expr)
        elif sc.peek() == "{":
            where = sc.mark()
            _parse_group(sc, ns)
            sc.skip_ws()
            _reject_unsupported(sc)  # names UNION / MINUS when they follow
            raise sc.error("unsupported: nested group patterns", where)
        else:
            _parse_triples_block(sc, ns, group.triples)


def _parse_triples_block(sc: Scanner, ns: dict[str, str], out: list[Pattern]) -> None:
    subject = read_term(sc, ns, variables=True)
    while True:
        sc.skip_ws()
        where = sc.mark()
        _reject_unsupported(sc)
        predicate = read_term(sc, ns, variables=True, allow_a=True)
        if not isinstance(predicate, (Iri, Var)):
            raise sc.error("predicate must be an IRI or a variable", where)
        while True:
            sc.skip_ws()
            _reject_unsupported(sc)
            obj = read_term(sc, ns, variables=True)
            out.append(Pattern(subject, predicate, obj))
            sc.skip_ws()
            if sc.peek() == ",":
                sc.advance()
                continue
            break
        if sc.peek() == ";":
            sc.advance()
            sc.skip_ws()
            if sc.peek() in ".}":
                break
            continue
        break
    sc.skip_ws()
    if sc.peek() == ".":
        sc.advance()
    elif sc.peek() != "}" and not _at_keyword(sc, ("OPTIONAL", "FILTER")):
        found = sc.peek() or "end of input"
        raise sc.error(f"expected '.' or '}}' after triple pattern, found {found!r}")


def _at_keyword(sc: Scanner, words) -> bool:
    m = _WORD.match(sc.text, sc.pos)
    return bool(m) and m.group(0).upper() in words and not sc.text.startswith(":", m.end())


def _parse_or(sc, ns) -> Expr:
    left = _parse_and(sc, ns)
    while True:
        sc.skip_ws()
        if not sc.startswith("||"):
            return left
        sc.advance(2)
        left = Or(left, _parse_and(sc, ns))


def _parse_and(sc, ns) -> Expr:
    left = _parse_rel(sc, ns)
    while True:
        sc.skip_ws()
        if not sc.startswith("&&"):
            return left
        sc.advance(2)
        left = And(left, _parse_rel(sc, ns))


def _parse_rel(sc, ns) -> Expr:
    left = _parse_unary(sc, ns)
    sc.skip_ws()
    for op in ("<=", ">=", "!=", "<", ">", "="):
        if sc.startswith(op):
            sc.advance(len(op))
            sc.skip_ws()
            return Compare(op, left, _parse_unary(sc, ns))
    if sc.peek() in ("+", "-", "*", "/"):
        raise sc.error(f"unsupported operator {sc.peek()!r}")
    return left


def _parse_unary(sc, ns) -> Expr:
    sc.skip_ws()
    if sc.peek() == "!" and not sc.startswith("!="):
        sc.advance()
        return Not(_parse_unary(sc, ns))
    return _parse_primary(sc, ns)


def _parse_primary(sc, ns) -> Expr:
    sc.skip_ws()
    where = sc.mark()
    if sc.peek() == "(":
        sc.advance()
        expr = _parse_or(sc, ns)
        sc.skip_ws()
        sc.expect(")")
        return expr
    m = _WORD.match(sc.text, sc.pos)
    if m:
        after = m.end()
        while after < len(sc.text) and sc.text[after] in " \t\r\n":
            after += 1
        if after < len(sc.text) and sc.text[after] == "(":
            fname = m.group(0)
            if fname.lower() not in FUNCTIONS:
                if fname.upper() in UNSUPPORTED:
                    raise sc.error(f"unsupported keyword: {fname.upper()}")
                raise sc.error(f"unknown function: {fname}")
            sc.advance(after - sc.pos + 1)
            args = []
            while True:
                sc.skip_ws()
                if sc.peek() == ")":
                    sc.advance()
                    break
                if args:
                    sc.expect(",", "',' between function arguments")
                args.append(_parse_or(sc, ns))
            arity = FUNCTIONS[fname.lower()]
            if len(args) != arity:
                raise ParseError(f"{fname} takes {arity} argument(s), got {len(args)}", *where)
            return Call(fname.lower(), tuple(args))
        _reject_unsupported(sc)
    term = read_term(sc, ns, variables=True)
    return term if isinstance(term, Var) else Const(term)


def load_query(path) -> Query:
    from pathlib import Path

    p = Path(path)
    return parse_query(p.read_text(encoding="utf-8"), name=p.stem)


# ---------------------------------------------------------------- filters


class _ErrorValue:
    """The third truth value: a type error or unbound variable."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ERROR"

    def __bool__(self) -> bool:
        return False


ERROR = _ErrorValue()


class _TypeError(Exception):
    pass


TRUE = Literal("true", XSD_BOOLEAN)
FALSE = Literal("false", XSD_BOOLEAN)


def _simple(t) -> bool:
    return isinstance(t, Literal) and t.lang is None and t.datatype == XSD_STRING


def _boolean(t):
    if isinstance(t, Literal) and t.datatype == XSD_BOOLEAN:
        if t.lexical in ("true", "1"):
            return True
        if t.lexical in ("false", "0"):
            return False
    return None


def _value(expr: Expr, row: dict[str, Term]) -> Term:
    if isinstance(expr, Var):
        if expr.name not in row:
            raise _TypeError(f"unbound ?{expr.name}")
        return row[expr.name]
    if isinstance(expr, Const):
        return expr.term
    if isinstance(expr, Call):
        args = [_value(a, row) for a in expr.args]
        if expr.name == "lang":
            if not isinstance(args[0], Literal):
                raise _TypeError("lang of a non-literal")
            return Literal(args[0].lang or "")
        if expr.name == "str":
            if isinstance(args[0], Literal):
                return Literal(args[0].lexical)
            if isinstance(args[0], Iri):
                return Literal(args[0].value)
            raise _TypeError("str of a blank node")
        if expr.name == "langmatches":
            tag, rng = args
            if not (_simple(tag) and _simple(rng)):
                raise _TypeError("langMatches needs simple literals")
            return TRUE if lang_matches(tag.lexical, rng.lexical) else FALSE
    result = eval_filter(expr, row)
    if result is ERROR:
        raise _TypeError("error in boolean subexpression")
    return TRUE if result else FALSE


def lang_matches(tag: str, rng: str) -> bool:
    """Basic language-range matching."""
    if rng == "*":
        return tag != ""
    tag, rng = tag.lower(), rng.lower()
    return tag == rng or tag.startswith(rng + "-")


def _ebv(t: Term) -> bool:
    b = _boolean(t)
    if b is not None:
        return b
    n = numeric_value(t) if isinstance(t, Literal) and t.datatype != XSD_STRING else None
    if n is not None:
        return n == n and n != 0
    if _simple(t):
        return t.lexical != ""
    raise _TypeError("no effective boolean value")


def _compare(op: str, a: Term, b: Term) -> bool:
    na, nb = numeric_value(a), numeric_value(b)
    if na is not None and nb is not None:
        return _COMPARE[op](*promote(na, nb))
    if _simple(a) and _simple(b):
        return _COMPARE[op](a.lexical, b.lexical)
    ba, bb = _boolean(a), _boolean(b)
    if ba is not None and bb is not None:
        return _COMPARE[op](ba, bb)
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    raise _TypeError(f"cannot order {a.n3()} and {b.n3()}")


def eval_filter(expr: Expr, row: dict[str, Term]):
    """Evaluate to ``True``, ``False`` or :data:`ERROR`; never raises on bad data."""
    if isinstance(expr, And):
        left, right = eval_filter(expr.left, row), eval_filter(expr.right, row)
        if left is False or right is False:
            return False
        if left is ERROR or right is ERROR:
            return ERROR
        return True
    if isinstance(expr, Or):
        left, right = eval_filter(expr.left, row), eval_filter(expr.right, row)
        if left is True or right is True:
            return True
        if left is ERROR or right is ERROR:
            return ERROR
        return False
    if isinstance(expr, Not):
        inner = eval_filter(expr.arg, row)
        return ERROR if inner is ERROR else not inner
    try:
        if isinstance(expr, Compare):
            return _compare(expr.op, _value(expr.left, row), _value(expr.right, row))
        return _ebv(_value(expr, row))
    except _TypeError:
        return ERROR


# ---------------------------------------------------------------- execution


@dataclass
class ExecutionStats:
    filter_errors: int = 0
    solutions: int = 0


@dataclass
class SolutionTable:
    header: list[str]
    rows: list[dict[str, Term]]
    stats: ExecutionStats = field(default_factory=ExecutionStats, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.rows)

    def tuples(self) -> list[tuple]:
        return [tuple(r.get(v) for v in self.header) for r in self.rows]

    def column(self, var: str) -> list:
        return [r.get(var) for r in self.rows]


def _resolve(x, row):
    return row.get(x.name) if isinstance(x, Var) else x


def _bound_count(pattern: Pattern, bound) -> int:
    return sum(1 for x in pattern if not isinstance(x, Var) or x.name in bound)


def _bgp(patterns: list[Pattern], graph: Graph, row: dict[str, Term]) -> Iterator[dict[str, Term]]:
    if not patterns:
        yield row
        return
    best = max(range(len(patterns)), key=lambda k: (_bound_count(patterns[k], row), -k))
    pattern = patterns[best]
    rest = patterns[:best] + patterns[best + 1:]
    s, p, o = (_resolve(x, row) for x in pattern)
    for t in graph.match(s, p, o):
        extended = dict(row)
        ok = True
        for x, value in zip(pattern, t):
            if isinstance(x, Var):
                have = extended.setdefault(x.name, value)
                if have != value:
                    ok = False
                    break
        if ok:
            yield from _bgp(rest, graph, extended)


def _compatible(a: dict, b: dict) -> bool:
    return all(a[k] == v for k, v in b.items() if k in a)


def _left_join(left, right, filters, stats) -> list[dict[str, Term]]:
    # index right rows on the variables every right row binds
    certain = set.intersection(*(set(r) for r in right)) if right else set()
    indexes: dict[tuple, dict] = {}
    out = []
    for lrow in left:
        keys = tuple(sorted(certain & lrow.keys()))
        index = indexes.get(keys)
        if index is None:
            index = {}
            for r in right:
                index.setdefault(tuple(r[k] for k in keys), []).append(r)
            indexes[keys] = index
        matched = False
        for rrow in index.get(tuple(lrow[k] for k in keys), ()):
            if not _compatible(lrow, rrow):
                continue
            merged = {**lrow, **rrow}
            if _filters_pass(filters, merged, stats):
                out.append(merged)
                matched = True
        if not matched:
            out.append(lrow)
    return out


def _filters_pass(filters, row, stats) -> bool:
    for f in filters:
        result = eval_filter(f, row)
        if result is ERROR:
            stats.filter_errors += 1
            return False
        if not result:
            return False
    return True


def _eval_group(group: GroupPattern, graph: Graph, stats: ExecutionStats, apply_filters: bool = True):
    rows = list(_bgp(group.triples, graph, {}))
    for opt in group.optionals:
        right = _eval_group(opt, graph, stats, apply_filters=False)
        rows = _left_join(rows, right, opt.filters, stats)
    if apply_filters and group.filters:
        rows = [r for r in rows if _filters_pass(group.filters, r, stats)]
    return rows


def execute(query: Query, graph: Graph) -> SolutionTable:
    """Evaluate ``query``; row order follows the (deterministic) join order.

    A group is evaluated as its basic graph pattern, left-joined with each
    OPTIONAL in turn (an OPTIONAL's own filters act as the join condition),
    and then filtered by the group's filters.
    """
    stats = ExecutionStats()
    rows = _eval_group(query.pattern, graph, stats)
    stats.solutions = len(rows)
    header = list(query.select)
    projected = []
    seen = set()
    for r in rows:
        row = {v: r[v] for v in header if v in r}
        if query.distinct:
            key = tuple(row.get(v) for v in header)
            if key in seen:
                continue
            seen.add(key)
        projected.append(row)
    return SolutionTable(header, projected, stats)


# ---------------------------------------------------------------- results


def to_tsv(table: SolutionTable) -> str:
    lines = ["\t".join("?" + v for v in table.header)]
    for row in table.rows:
        cells = []
        for v in table.header:
            term = row.get(v)
            cells.append("" if term is None else term.n3().replace("\t", "\\t"))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def term_json(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"type": "uri", "value": term.value}
    if isinstance(term, Blank):
        return {"type": "bnode", "value": term.label}
    out = {"type": "literal", "value": term.lexical}
    if term.lang is not None:
        out["xml:lang"] = term.lang
    elif term.datatype != XSD_STRING:
        out["datatype"] = term.datatype
    return out


def to_json(table: SolutionTable) -> str:
    doc = {
        "head": {"vars": table.header},
        "results": {"bindings": [{v: term_json(t) for v, t in row.items()} for row in table.rows]},
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
