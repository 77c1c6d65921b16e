"""Line-oriented N-Triples reader/writer with a small Turtle-subset extension.

Accepted on top of plain N-Triples: ``@prefix p: <ns> .`` / ``PREFIX p: <ns>``
directives, prefixed names, the ``a`` keyword, and bare numeric/boolean
literals.  Every statement still has to fit on a single line.
"""

from __future__ import annotations

from ._scan import Scanner, read_prefix_decl, read_term
from .errors import GraphError, ParseError
from .rdf import Graph, PrefixMap, Triple


def parse_ntriples(text: str) -> tuple[Graph, PrefixMap]:
    graph = Graph()
    prefixes = PrefixMap()
    # split on LF only: str.splitlines() would also break on U+2028 and friends
    for lineno, line in enumerate(text.split("\n"), start=1):
        sc = Scanner(line.removesuffix("\r"))
        sc.line = lineno
        sc.skip_ws()
        if sc.at_end():
            continue
        if sc.startswith("@prefix"):
            sc.advance(len("@prefix"))
            sc.skip_ws()
            label, ns = read_prefix_decl(sc)
            sc.skip_ws()
            sc.expect(".", "'.' ending the @prefix directive")
            prefixes.mapping[label] = ns
        elif sc.keyword("PREFIX"):
            sc.skip_ws()
            label, ns = read_prefix_decl(sc)
            prefixes.mapping[label] = ns
        else:
            graph.add(_read_triple(sc, prefixes.mapping))
        sc.skip_ws()
        if not sc.at_end():
            raise sc.error(f"unexpected {sc.peek()!r} after statement")
    return graph, prefixes


def _read_triple(sc: Scanner, prefixes: dict[str, str]) -> Triple:
    parts = []
    for position in ("subject", "predicate", "object"):
        at = sc.mark()
        if sc.at_end() or sc.peek() == "#":
            raise sc.error(f"missing {position}")
        term = read_term(sc, prefixes, blanks=position != "predicate", allow_a=position == "predicate")
        parts.append((term, at))
        nxt = sc.peek()
        if nxt and nxt not in " \t." and not (position == "object" and nxt == "#"):
            raise sc.error(f"expected whitespace after {position}")
        sc.skip_ws(comments=False)
    if sc.peek() != ".":
        raise sc.error("missing terminal '.'")
    sc.advance()
    try:
        return Triple(parts[0][0], parts[1][0], parts[2][0])
    except GraphError as exc:
        bad = 0 if "subject" in str(exc) else 1 if "predicate" in str(exc) else 2
        raise ParseError(str(exc), *parts[bad][1]) from None


def serialize_ntriples(graph: Graph) -> str:
    """Canonical N-Triples: one line per triple, lines sorted, newline-terminated."""
    lines = sorted(t.n3() for t in graph)
    return "".join(line + "\n" for line in lines)


def load_graph(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_ntriples(fh.read())[0]
