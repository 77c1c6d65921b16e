"""SenML JSON parsing and annotation of measurements into RDF observations."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import AnnotationError, SenMLError
from .rdf import M3, RDF_TYPE, XSD_DOUBLE, XSD_INTEGER, Graph, Iri, Literal, Triple, check_iri, local_name

HAS_VALUE = Iri(M3 + "hasValue")
HAS_UNIT = Iri(M3 + "hasUnit")
HAS_DATETIME = Iri(M3 + "hasDateTimeValue")
OBS_PREFIX = "urn:swot:obs:"

_UNSUPPORTED_VALUES = {"vs": "string", "vb": "boolean", "vd": "data", "bs": "sum", "s": "sum"}
_STRING_KEYS = ("bn", "bu", "n", "u")
_NUMBER_KEYS = ("bt", "bv", "v", "t", "bver")


@dataclass(frozen=True)
class SenMLRecord:
    name: str
    unit: str
    value: float | int
    time: int | None = None

    def __post_init__(self):
        if not self.name:
            raise SenMLError("record name is empty")
        if not self.unit:
            raise SenMLError(f"record {self.name!r} has no unit")
        if not math.isfinite(self.value):
            raise SenMLError(f"record {self.name!r} has a non-finite value")

    @property
    def value_lexical(self) -> str:
        return repr(self.value) if isinstance(self.value, float) else str(self.value)


@dataclass(frozen=True)
class SenMLPack:
    records: tuple[SenMLRecord, ...]
    base_name: str | None = None
    base_time: int | None = None
    base_unit: str | None = None

    def __post_init__(self):
        if not self.records:
            raise SenMLError("empty pack")

    def __len__(self) -> int:
        return len(self.records)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def parse_senml(text: str) -> SenMLPack:
    """Parse ``application/senml+json`` text and resolve base fields into each record.

    Base fields (``bn``, ``bt``, ``bu``, ``bv``) apply to the record carrying
    them and to every later record until overridden, as in RFC 8428.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SenMLError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, list):
        raise SenMLError("a SenML pack must be a JSON array")
    if not doc:
        raise SenMLError("empty pack")

    bn, bt, bu, bv = "", None, None, None
    records = []
    for i, rec in enumerate(doc):
        if not isinstance(rec, dict):
            raise SenMLError(f"record {i}: expected a JSON object")
        for key, kind in _UNSUPPORTED_VALUES.items():
            if key in rec:
                raise SenMLError(f"record {i}: {kind} values ({key!r}) are not supported")
        for key in rec:
            if key.endswith("_"):
                raise SenMLError(f"record {i}: unknown must-understand key {key!r}")
        for key in _STRING_KEYS:
            if key in rec and not isinstance(rec[key], str):
                raise SenMLError(f"record {i}: key {key!r} must be a string")
        for key in _NUMBER_KEYS:
            if key in rec and not _is_number(rec[key]):
                raise SenMLError(f"record {i}: key {key!r} must be a number")

        if "bn" in rec:
            bn = rec["bn"]
        if "bt" in rec:
            bt = rec["bt"]
        if "bu" in rec:
            bu = rec["bu"]
        if "bv" in rec:
            bv = rec["bv"]

        name = bn + rec.get("n", "")
        if not name:
            raise SenMLError(f"record {i}: no resolvable name")
        unit = rec.get("u", bu)
        if not unit:
            raise SenMLError(f"record {i} ({name}): no unit")
        if "v" not in rec:
            raise SenMLError(f"record {i} ({name}): missing numeric value 'v'")
        value = rec["v"] if bv is None else rec["v"] + bv
        if not math.isfinite(value):
            raise SenMLError(f"record {i} ({name}): value is not finite")

        time = None
        if bt is not None or "t" in rec:
            raw = (bt or 0) + rec.get("t", 0)
            if raw != int(raw):
                raise SenMLError(f"record {i} ({name}): time {raw!r} is not a whole number of seconds")
            time = int(raw)
        records.append(SenMLRecord(name, unit, value, time))

    first = doc[0]
    return SenMLPack(tuple(records), first.get("bn"), first.get("bt"), first.get("bu"))


@dataclass
class AnnotationMapping:
    """Measurement-name and unit lookup tables. Keys match case-insensitively."""

    name_to_class: dict[str, str] = field(default_factory=dict)
    unit_to_iri: dict[str, str] = field(default_factory=dict)
    domain_tag: str = ""

    def __post_init__(self):
        self.name_to_class = {k.casefold(): v for k, v in self.name_to_class.items()}
        self.unit_to_iri = {k.casefold(): v for k, v in self.unit_to_iri.items()}
        for iri in (*self.name_to_class.values(), *self.unit_to_iri.values()):
            check_iri(iri)

    def class_for(self, name: str) -> str | None:
        hit = self.name_to_class.get(name.casefold())
        if hit is None and ("/" in name or ":" in name):
            # base-named records such as "patient1/temp" fall back to the last segment
            hit = self.name_to_class.get(local_name(name).casefold())
        return hit

    def unit_for(self, code: str) -> str | None:
        return self.unit_to_iri.get(code.casefold())


def parse_mapping(text: str, domain_tag: str = "") -> AnnotationMapping:
    """Read the ``mappings.tsv`` format: ``kind<TAB>key<TAB>IRI`` with kind in {name, unit}."""
    names, units = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise AnnotationError(f"mappings line {lineno}: expected 3 tab-separated columns, got {len(cols)}")
        kind, key, iri = (c.strip() for c in cols)
        if iri.startswith("<") and iri.endswith(">"):
            iri = iri[1:-1]
        try:
            check_iri(iri)
        except ValueError as exc:
            raise AnnotationError(f"mappings line {lineno}: {exc}") from None
        if kind == "name":
            names[key] = iri
        elif kind == "unit":
            units[key] = iri
        else:
            raise AnnotationError(f"mappings line {lineno}: unknown kind {kind!r}")
    return AnnotationMapping(names, units, domain_tag)


def load_mapping(path: str | Path, domain_tag: str = "") -> AnnotationMapping:
    return parse_mapping(Path(path).read_text(encoding="utf-8"), domain_tag)


def default_mapping() -> AnnotationMapping:
    text = resources.files("swotforge").joinpath("registry", "mappings.tsv").read_text(encoding="utf-8")
    return parse_mapping(text, "generic")


def observation_iri(record: SenMLRecord, index: int) -> Iri:
    time = "" if record.time is None else str(record.time)
    key = f"{record.name}|{record.value_lexical}|{time}|{index}"
    return Iri(OBS_PREFIX + hashlib.sha256(key.encode("utf-8")).hexdigest()[:16])


def annotate(pack: SenMLPack, mapping: AnnotationMapping) -> Graph:
    """One observation node per record: type, value, unit and (when known) time."""
    graph = Graph()
    for i, rec in enumerate(pack.records):
        cls = mapping.class_for(rec.name)
        if cls is None:
            raise AnnotationError(f"unmapped measurement name: {rec.name} (record {i})")
        unit = mapping.unit_for(rec.unit)
        if unit is None:
            raise AnnotationError(f"unmapped unit: {rec.unit}")
        obs = observation_iri(rec, i)
        graph.add(Triple(obs, RDF_TYPE, Iri(cls)))
        graph.add(Triple(obs, HAS_VALUE, Literal(rec.value_lexical, XSD_DOUBLE)))
        graph.add(Triple(obs, HAS_UNIT, Iri(unit)))
        if rec.time is not None:
            graph.add(Triple(obs, HAS_DATETIME, Literal(str(rec.time), XSD_INTEGER)))
    return graph
