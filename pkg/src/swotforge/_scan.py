"""Character scanner and term readers shared by the Turtle, rule and query parsers."""

from __future__ import annotations

import re

from .errors import ParseError
from .rdf import (
    RDF_TYPE,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_DOUBLE,
    XSD_INTEGER,
    Blank,
    Iri,
    Literal,
    Var,
    check_iri,
)

_WS = re.compile(r"[ \t\r\n]+")
_DOUBLE = re.compile(r"[+-]?(?:\d+\.\d*[eE][+-]?\d+|\.\d+[eE][+-]?\d+|\d+[eE][+-]?\d+)")
_DECIMAL = re.compile(r"[+-]?\d*\.\d+")
_INTEGER = re.compile(r"[+-]?\d+")
_PNAME = re.compile(r"([A-Za-z](?:[\w.-]*[\w-])?)?:((?:[\w-]|\.(?=[\w-]))*)")
_LANG = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*")
_BLANK = re.compile(r"_:([A-Za-z0-9_](?:[\w.-]*[\w-])?)")
_VAR = re.compile(r"[?$]([A-Za-z_]\w*)")
_NAME = re.compile(r"[A-Za-z_][\w-]*")

_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


class Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message: str, where: tuple[int, int] | None = None) -> ParseError:
        line, col = where if where else (self.line, self.col)
        return ParseError(message, line, col)

    def mark(self) -> tuple[int, int]:
        return self.line, self.col

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def startswith(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)

    def advance(self, n: int = 1) -> str:
        chunk = self.text[self.pos:self.pos + n]
        newlines = chunk.count("\n")
        if newlines:
            self.line += newlines
            self.col = len(chunk) - chunk.rfind("\n")
        else:
            self.col += len(chunk)
        self.pos += len(chunk)
        return chunk

    def match(self, pattern: re.Pattern) -> re.Match | None:
        m = pattern.match(self.text, self.pos)
        if m:
            self.advance(m.end() - m.start())
        return m

    def skip_ws(self, comments: bool = True) -> None:
        while True:
            self.match(_WS)
            if comments and self.peek() == "#":
                end = self.text.find("\n", self.pos)
                self.advance((len(self.text) if end < 0 else end) - self.pos)
                continue
            return

    def expect(self, token: str, what: str | None = None) -> None:
        if not self.startswith(token):
            found = self.peek() or "end of input"
            raise self.error(f"expected {what or repr(token)}, found {found!r}")
        self.advance(len(token))

    def keyword(self, word: str) -> bool:
        """Consume ``word`` case-insensitively when it stands alone."""
        end = self.pos + len(word)
        if self.text[self.pos:end].lower() != word.lower():
            return False
        if end < len(self.text) and (self.text[end].isalnum() or self.text[end] in "_:-"):
            return False
        self.advance(len(word))
        return True

    # ------------------------------------------------------------ lexemes

    def read_iriref(self) -> str:
        start = self.mark()
        self.expect("<")
        out = []
        while True:
            ch = self.peek()
            if ch == "":
                raise self.error("unterminated IRI, missing '>'", start)
            if ch == ">":
                self.advance()
                break
            if ch in " \t\r\n<\"{}|^`":
                raise self.error(f"illegal character {ch!r} in IRI")
            if ch == "\\":
                out.append(self._read_uchar())
                continue
            out.append(self.advance())
        value = "".join(out)
        try:
            check_iri(value)
        except ValueError as exc:
            raise self.error(str(exc), start) from None
        return value

    def _read_uchar(self) -> str:
        where = self.mark()
        kind = self.peek(1)
        width = {"u": 4, "U": 8}.get(kind)
        digits = self.text[self.pos + 2:self.pos + 2 + width] if width else ""
        if not width or len(digits) != width or not all(c in "0123456789abcdefABCDEF" for c in digits):
            raise self.error("bad escape sequence", where)
        self.advance(2 + width)
        code = int(digits, 16)
        if code > 0x10FFFF:
            raise self.error("escape outside the Unicode range", where)
        return chr(code)

    def read_string(self) -> str:
        start = self.mark()
        quote = self.peek()
        if quote not in "\"'":
            raise self.error("expected a quoted string")
        self.advance()
        out = []
        while True:
            ch = self.peek()
            if ch == "" or ch in "\r\n":
                raise self.error("unterminated string literal", start)
            if ch == quote:
                self.advance()
                return "".join(out)
            if ch == "\\":
                nxt = self.peek(1)
                if nxt in "uU":
                    out.append(self._read_uchar())
                elif nxt in _ECHAR:
                    out.append(_ECHAR[nxt])
                    self.advance(2)
                else:
                    raise self.error("bad escape sequence")
                continue
            out.append(self.advance())

    def read_name(self) -> str | None:
        m = self.match(_NAME)
        return m.group(0) if m else None


# ---------------------------------------------------------------- terms


def read_term(sc: Scanner, prefixes: dict[str, str], *, variables: bool = False,
              blanks: bool = False, allow_a: bool = False):
    """Read one RDF term (or variable) at the scanner position."""
    where = sc.mark()
    ch = sc.peek()
    if ch == "<":
        return Iri(sc.read_iriref())
    if ch in "\"'":
        lexical = sc.read_string()
        if sc.peek() == "@":
            sc.advance()
            m = sc.match(_LANG)
            if not m:
                raise sc.error("bad language tag")
            return Literal(lexical, lang=m.group(0))
        if sc.startswith("^^"):
            sc.advance(2)
            dt = sc.read_iriref() if sc.peek() == "<" else _read_pname(sc, prefixes)
            return Literal(lexical, dt)
        return Literal(lexical)
    if ch in "?$":
        if not variables:
            raise sc.error("variables are not allowed here")
        m = sc.match(_VAR)
        if not m:
            raise sc.error("bad variable name")
        return Var(m.group(1))
    if sc.startswith("_:"):
        if not blanks:
            raise sc.error("blank nodes are not allowed here")
        m = sc.match(_BLANK)
        if not m:
            raise sc.error("bad blank node label")
        return Blank(m.group(1))
    for pattern, dt in ((_DOUBLE, XSD_DOUBLE), (_DECIMAL, XSD_DECIMAL), (_INTEGER, XSD_INTEGER)):
        m = sc.match(pattern)
        if m:
            return Literal(m.group(0), dt)
    if allow_a and sc.peek() == "a" and not (sc.peek(1).isalnum() or sc.peek(1) in "_:-"):
        sc.advance()
        return RDF_TYPE
    for word in ("true", "false"):
        if sc.startswith(word) and not (sc.peek(len(word)).isalnum() or sc.peek(len(word)) in "_:-"):
            sc.advance(len(word))
            return Literal(word, XSD_BOOLEAN)
    if ch.isalpha() or ch == ":":
        return Iri(_read_pname(sc, prefixes))
    raise sc.error(f"unexpected {ch!r}" if ch else "unexpected end of input", where)


def _read_pname(sc: Scanner, prefixes: dict[str, str]) -> str:
    where = sc.mark()
    m = sc.match(_PNAME)
    if not m:
        raise sc.error("expected an IRI or prefixed name")
    prefix = m.group(1) or ""
    if prefix not in prefixes:
        raise sc.error(f"undeclared prefix: {prefix}:", where)
    return prefixes[prefix] + m.group(2)


def read_prefix_decl(sc: Scanner) -> tuple[str, str]:
    """Read ``p: <iri>`` following a PREFIX / @prefix keyword."""
    where = sc.mark()
    m = sc.match(re.compile(r"([A-Za-z](?:[\w.-]*[\w-])?)?:"))
    if not m:
        raise sc.error("expected a prefix label", where)
    sc.skip_ws()
    if sc.peek() != "<":
        raise sc.error("expected '<' starting the namespace IRI")
    return m.group(1) or "", sc.read_iriref()
