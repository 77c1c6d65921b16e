"""RDF terms, triples and an indexed in-memory graph."""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Iterator, Union

from .errors import GraphError

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
XSD = "http://www.w3.org/2001/XMLSchema#"
OWL = "http://www.w3.org/2002/07/owl#"
M3 = "http://swot-forge.local/m3#"
NAT = "http://swot-forge.local/naturopathy#"

XSD_STRING = XSD + "string"
XSD_BOOLEAN = XSD + "boolean"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_DOUBLE = XSD + "double"
XSD_FLOAT = XSD + "float"
RDF_LANGSTRING = RDF + "langString"

_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*:")
_LANG_TAG = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*\Z")
_BLANK_LABEL = re.compile(r"[A-Za-z0-9_](?:[\w.-]*[\w-])?\Z")


def check_iri(value: str) -> None:
    if not value:
        raise GraphError("empty IRI")
    if any(c.isspace() for c in value):
        raise GraphError(f"whitespace in IRI: {value!r}")
    if not _SCHEME.match(value):
        raise GraphError(f"relative IRI: {value!r}")


@dataclass(frozen=True, slots=True)
class Iri:
    value: str

    def __post_init__(self):
        check_iri(self.value)

    def n3(self) -> str:
        return "<" + _escape_iri(self.value) + ">"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: str = XSD_STRING
    lang: str | None = None

    def __post_init__(self):
        if not isinstance(self.lexical, str):
            raise GraphError("literal lexical form must be a string")
        if self.lang is not None:
            if not _LANG_TAG.match(self.lang):
                raise GraphError(f"bad language tag: {self.lang!r}")
            # tags compare case-insensitively, so store them folded
            object.__setattr__(self, "lang", self.lang.lower())
            if self.datatype == XSD_STRING:
                object.__setattr__(self, "datatype", RDF_LANGSTRING)
            elif self.datatype != RDF_LANGSTRING:
                raise GraphError("a language-tagged literal must have datatype rdf:langString")
        elif self.datatype == RDF_LANGSTRING:
            raise GraphError("rdf:langString literal without a language tag")
        else:
            check_iri(self.datatype)

    def n3(self) -> str:
        body = '"' + _escape_string(self.lexical) + '"'
        if self.lang is not None:
            return body + "@" + self.lang
        if self.datatype == XSD_STRING:
            return body
        return body + "^^<" + _escape_iri(self.datatype) + ">"

    def __str__(self) -> str:
        return self.lexical


@dataclass(frozen=True, slots=True)
class Blank:
    label: str

    def __post_init__(self):
        if not _BLANK_LABEL.match(self.label):
            raise GraphError(f"bad blank node label: {self.label!r}")

    def n3(self) -> str:
        return "_:" + self.label

    def __str__(self) -> str:
        return "_:" + self.label


Term = Union[Iri, Literal, Blank]


@dataclass(frozen=True, slots=True)
class Var:
    """A query or rule variable; the name is stored without its leading ``?``."""

    name: str

    def __post_init__(self):
        if not self.name or self.name.startswith("?"):
            raise ValueError(f"bad variable name: {self.name!r}")

    def n3(self) -> str:
        return "?" + self.name

    def __str__(self) -> str:
        return "?" + self.name


TermOrVar = Union[Term, Var]


def fmt_arg(x: TermOrVar) -> str:
    if isinstance(x, Literal) and numeric_value(x) is not None:
        return x.lexical
    return x.n3()


@dataclass(frozen=True, slots=True)
class Pattern:
    """Triple pattern: each position is a term or a :class:`Var`."""

    subject: TermOrVar
    predicate: TermOrVar
    object: TermOrVar

    def __iter__(self):
        yield self.subject
        yield self.predicate
        yield self.object

    def variables(self) -> list[str]:
        return [x.name for x in self if isinstance(x, Var)]

    def __str__(self) -> str:
        return "(" + " ".join(fmt_arg(x) for x in self) + ")"


RDF_TYPE = Iri(RDF + "type")
RDFS_LABEL = Iri(RDFS + "label")


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Term
    predicate: Iri
    object: Term

    def __post_init__(self):
        if not isinstance(self.subject, (Iri, Blank)):
            raise GraphError(f"subject must be an IRI or blank node, got {self.subject!r}")
        if not isinstance(self.predicate, Iri):
            raise GraphError(f"predicate must be an IRI, got {self.predicate!r}")
        if not isinstance(self.object, (Iri, Blank, Literal)):
            raise GraphError(f"object must be an RDF term, got {self.object!r}")

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."

    def __iter__(self):
        yield self.subject
        yield self.predicate
        yield self.object


DEFAULT_PREFIXES = {
    "rdf": RDF,
    "rdfs": RDFS,
    "xsd": XSD,
    "owl": OWL,
    "m3": M3,
    "nat": NAT,
}


@dataclass
class PrefixMap:
    mapping: dict[str, str] = field(default_factory=dict)

    def expand(self, curie: str) -> str:
        prefix, sep, local = curie.partition(":")
        if not sep or prefix not in self.mapping:
            raise KeyError(f"unknown prefix in {curie!r}")
        return self.mapping[prefix] + local

    def shrink(self, iri: str) -> str:
        """Best (longest-namespace) CURIE for ``iri``; the IRI itself when nothing fits."""
        best = None
        for prefix, ns in sorted(self.mapping.items()):
            if iri.startswith(ns) and (best is None or len(ns) > len(self.mapping[best])):
                best = prefix
        if best is None:
            return iri
        return f"{best}:{iri[len(self.mapping[best]):]}"

    def __contains__(self, prefix: str) -> bool:
        return prefix in self.mapping


# ---------------------------------------------------------------- escaping

_IRI_ESCAPE = set('<>"{}|^`\\')


def _escape_iri(value: str) -> str:
    if not any(c in _IRI_ESCAPE or ord(c) <= 0x20 for c in value):
        return value
    return "".join(f"\\u{ord(c):04X}" if c in _IRI_ESCAPE or ord(c) <= 0x20 else c for c in value)


_STRING_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r"}


def _escape_string(value: str) -> str:
    return "".join(_STRING_ESCAPES.get(c, c) for c in value)


# ---------------------------------------------------------------- numbers

_INTEGER_TYPES = {
    XSD_INTEGER, XSD + "int", XSD + "long", XSD + "short", XSD + "byte",
    XSD + "nonNegativeInteger", XSD + "positiveInteger",
    XSD + "negativeInteger", XSD + "nonPositiveInteger",
}
_PLAIN_DECIMAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")
_INTEGER_LEX = re.compile(r"[+-]?\d+\Z")
_DECIMAL_LEX = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)\Z")
_FLOAT_LEX = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z|[+-]?INF\Z|NaN\Z")


def numeric_value(term) -> float | Decimal | None:
    """Numeric value of a numeric-typed (or plain decimal) literal, else ``None``.

    Doubles and floats come back as ``float``; decimals, integers and plain
    strings as ``Decimal``.  Compare values through :func:`promote`.
    """
    if not isinstance(term, Literal):
        return None
    lex = term.lexical.strip()
    dt = term.datatype
    if dt in (XSD_DOUBLE, XSD_FLOAT):
        return float(lex.replace("INF", "inf")) if _FLOAT_LEX.match(lex) else None
    if dt in _INTEGER_TYPES:
        return Decimal(lex) if _INTEGER_LEX.match(lex) else None
    if dt == XSD_DECIMAL:
        return Decimal(lex) if _DECIMAL_LEX.match(lex) else None
    if dt == XSD_STRING and _PLAIN_DECIMAL.match(lex):
        return Decimal(lex)
    return None


def promote(a, b):
    """Numeric type promotion: a double on either side makes both doubles.

    Without it ``Decimal("38.2")`` and ``38.2`` compare unequal, since Python
    compares the exact binary value of the float.
    """
    if isinstance(a, float) or isinstance(b, float):
        return float(a), float(b)
    return a, b


# ---------------------------------------------------------------- graph


class Graph:
    """Set of triples with subject-, predicate- and object-first indexes.

    Each index is a two-level dict whose leaves map the remaining position to
    the stored :class:`Triple`, so lookups never allocate new triples.  Dicts
    keep insertion order, which makes every iteration deterministic.
    Mutation is serialized by a lock; engines work on :meth:`copy` snapshots.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: dict[Triple, None] = {}
        self._spo: dict = {}
        self._pos: dict = {}
        self._osp: dict = {}
        self._lock = threading.RLock()
        for t in triples:
            self.add(t)

    def add(self, t: Triple) -> bool:
        if not isinstance(t, Triple):
            raise GraphError(f"not a Triple: {t!r}")
        with self._lock:
            if t in self._triples:
                return False
            self._triples[t] = None
            s, p, o = t.subject, t.predicate, t.object
            self._spo.setdefault(s, {}).setdefault(p, {})[o] = t
            self._pos.setdefault(p, {}).setdefault(o, {})[s] = t
            self._osp.setdefault(o, {}).setdefault(s, {})[p] = t
            return True

    def discard(self, t: Triple) -> bool:
        with self._lock:
            if t not in self._triples:
                return False
            del self._triples[t]
            s, p, o = t.subject, t.predicate, t.object
            for index, a, b, c in ((self._spo, s, p, o), (self._pos, p, o, s), (self._osp, o, s, p)):
                inner = index[a][b]
                del inner[c]
                if not inner:
                    del index[a][b]
                    if not index[a]:
                        del index[a]
            return True

    def update(self, triples: Iterable[Triple]) -> int:
        return sum(self.add(t) for t in triples)

    def match(self, s=None, p=None, o=None) -> list[Triple]:
        """Triples agreeing with every given position (``None`` is a wildcard)."""
        if p is not None and not isinstance(p, Iri):
            return []
        if s is not None:
            by_p = self._spo.get(s)
            if by_p is None:
                return []
            if p is not None:
                by_o = by_p.get(p)
                if by_o is None:
                    return []
                if o is not None:
                    t = by_o.get(o)
                    return [t] if t is not None else []
                return list(by_o.values())
            if o is not None:
                by_p2 = self._osp.get(o, {}).get(s)
                return list(by_p2.values()) if by_p2 else []
            return [t for by_o in by_p.values() for t in by_o.values()]
        if p is not None:
            by_o = self._pos.get(p)
            if by_o is None:
                return []
            if o is not None:
                by_s = by_o.get(o)
                return list(by_s.values()) if by_s else []
            return [t for by_s in by_o.values() for t in by_s.values()]
        if o is not None:
            by_s = self._osp.get(o)
            if by_s is None:
                return []
            return [t for by_p in by_s.values() for t in by_p.values()]
        return list(self._triples)

    def count(self, s=None, p=None, o=None) -> int:
        """Cheap cardinality estimate used for join ordering (exact for most shapes)."""
        if s is None and p is None and o is None:
            return len(self._triples)
        if s is not None and p is None and o is None:
            return sum(len(v) for v in self._spo.get(s, {}).values())
        if p is not None and s is None and o is None:
            return sum(len(v) for v in self._pos.get(p, {}).values())
        if o is not None and s is None and p is None:
            return sum(len(v) for v in self._osp.get(o, {}).values())
        return len(self.match(s, p, o))

    def terms(self) -> set:
        out = set()
        for t in self._triples:
            out.update(t)
        return out

    def blank_labels(self) -> set[str]:
        return {x.label for x in self.terms() if isinstance(x, Blank)}

    def copy(self) -> "Graph":
        with self._lock:
            return Graph(self._triples)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(list(self._triples))

    def __contains__(self, t) -> bool:
        return t in self._triples

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._triples.keys() == other._triples.keys()

    def __repr__(self) -> str:
        return f"<Graph with {len(self)} triples>"

    # the lock is not picklable and not needed across threads after transfer
    def __getstate__(self):
        return list(self._triples)

    def __setstate__(self, state):
        self.__init__(state)


def insert(graph: Graph, t: Triple) -> bool:
    return graph.add(t)


def match(graph: Graph, s=None, p=None, o=None) -> list[Triple]:
    return graph.match(s, p, o)


def _relabel(term, mapping: dict[str, str]):
    if isinstance(term, Blank):
        return Blank(mapping[term.label])
    return term


def merge(target: Graph, sources: Iterable[Graph]) -> Graph:
    """Union of ``target`` and ``sources`` as a new graph.

    Blank nodes of the i-th source are renamed to ``src{i}_<label>`` so that
    equal labels from different documents stay distinct.  Target labels are
    kept; if a renamed label would collide with one already in use, the prefix
    grows an ``x`` until it does not.
    """
    out = target.copy()
    used = out.blank_labels()
    for i, src in enumerate(sources):
        labels = sorted(src.blank_labels())
        prefix = f"src{i}_"
        while any(prefix + lab in used for lab in labels):
            prefix = prefix[:-1] + "x_"
        mapping = {lab: prefix + lab for lab in labels}
        used.update(mapping.values())
        for t in src:
            if mapping:
                t = Triple(_relabel(t.subject, mapping), t.predicate, _relabel(t.object, mapping))
            out.add(t)
    return out


def local_name(iri: str) -> str:
    for sep in ("#", "/", ":"):
        idx = iri.rfind(sep)
        if 0 <= idx < len(iri) - 1:
            return iri[idx + 1:]
    return iri
