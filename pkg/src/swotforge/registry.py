"""File-backed template catalogue: find templates by sensors and domain, then
materialize one into parsed graphs, rules, queries and an annotation mapping.

Registry layout::

    registry.manifest     one [template] block per template
    mappings.tsv          default annotation mapping
    ontologies/*.ttl  datasets/*.ttl  rules/*.rules  queries/*.rq
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ParseError, RegistryError, SwotError, UnknownTemplate
from .ntriples import parse_ntriples
from .rdf import Graph, merge
from .rules import Rule, parse_rules
from .senml import AnnotationMapping, parse_mapping
from .sparql import Query, parse_query

MANIFEST = "registry.manifest"
_LIST_FIELDS = ("sensors", "domains", "ontologies", "datasets", "rules", "queries")
_STR_FIELDS = ("id", "title", "description", "mapping")


@dataclass(frozen=True)
class Template:
    id: str
    title: str = ""
    sensors: frozenset[str] = frozenset()
    domains: frozenset[str] = frozenset()
    ontology_paths: tuple[str, ...] = ()
    dataset_paths: tuple[str, ...] = ()
    rule_paths: tuple[str, ...] = ()
    query_paths: tuple[str, ...] = ()
    description: str = ""
    mapping_path: str = "mappings.tsv"

    def to_json(self) -> dict:
        d = asdict(self)
        d["sensors"] = sorted(self.sensors)
        d["domains"] = sorted(self.domains)
        for key in ("ontology_paths", "dataset_paths", "rule_paths", "query_paths"):
            d[key] = list(d[key])
        return d


@dataclass
class TemplateBundle:
    template: Template
    ontology: Graph
    dataset: Graph
    rules: list[Rule]
    queries: list[Query]
    mapping: AnnotationMapping


@dataclass
class Registry:
    root: Path
    templates: dict[str, Template] = field(default_factory=dict)
    by_sensor: dict[str, list[str]] = field(default_factory=dict)
    by_domain: dict[str, list[str]] = field(default_factory=dict)
    _bundles: dict[str, TemplateBundle] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __len__(self) -> int:
        return len(self.templates)

    def __contains__(self, template_id: str) -> bool:
        return template_id in self.templates

    def find(self, sensors, domain: str) -> list[Template]:
        return find_templates(self, sensors, domain)

    def materialize(self, template_id: str) -> TemplateBundle:
        return materialize(self, template_id)

    def bundle(self, template_id: str) -> TemplateBundle:
        """Materialize once and cache; bundles are never mutated afterwards."""
        with self._lock:
            if template_id not in self._bundles:
                self._bundles[template_id] = materialize(self, template_id)
            return self._bundles[template_id]

    def check(self) -> list[str]:
        """Materialize every template; returns the ids that succeeded."""
        return [materialize(self, tid).template.id for tid in self.templates]


def shipped_registry_root() -> Path:
    return Path(str(resources.files("swotforge").joinpath("registry")))


def parse_manifest(text: str) -> list[Template]:
    blocks: list[dict] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[template]":
            blocks.append({"_line": lineno})
            continue
        if line.startswith("["):
            raise RegistryError(f"manifest line {lineno}: unknown section {line}")
        if not blocks:
            raise RegistryError(f"manifest line {lineno}: key outside a [template] block")
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq:
            raise RegistryError(f"manifest line {lineno}: expected key = value")
        if key not in _LIST_FIELDS and key not in _STR_FIELDS:
            raise RegistryError(f"manifest line {lineno}: unknown key {key!r}")
        if key in blocks[-1]:
            raise RegistryError(f"manifest line {lineno}: repeated key {key!r}")
        try:
            parsed = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise RegistryError(f"manifest line {lineno}: bad value for {key!r}: {exc.msg}") from None
        if key in _LIST_FIELDS:
            if not isinstance(parsed, list) or not all(isinstance(x, str) for x in parsed):
                raise RegistryError(f"manifest line {lineno}: {key!r} must be a list of strings")
        elif not isinstance(parsed, str):
            raise RegistryError(f"manifest line {lineno}: {key!r} must be a string")
        blocks[-1][key] = parsed

    templates = []
    for block in blocks:
        if not block.get("id"):
            raise RegistryError(f"manifest line {block['_line']}: template without an id")
        templates.append(Template(
            id=block["id"],
            title=block.get("title", ""),
            sensors=frozenset(s.casefold() for s in block.get("sensors", [])),
            domains=frozenset(d.casefold() for d in block.get("domains", [])),
            ontology_paths=tuple(block.get("ontologies", [])),
            dataset_paths=tuple(block.get("datasets", [])),
            rule_paths=tuple(block.get("rules", [])),
            query_paths=tuple(block.get("queries", [])),
            description=block.get("description", ""),
            mapping_path=block.get("mapping", "mappings.tsv"),
        ))
    return templates


def load_registry(root_dir=None) -> Registry:
    """Index the manifest under ``root_dir`` (the shipped registry by default).

    Referenced files are not opened here; :func:`materialize` validates them.
    """
    root = Path(root_dir) if root_dir is not None else shipped_registry_root()
    manifest = root / MANIFEST
    if not manifest.is_file():
        raise RegistryError(f"missing manifest: {manifest}")
    registry = Registry(root)
    for tpl in parse_manifest(manifest.read_text(encoding="utf-8")):
        if tpl.id in registry.templates:
            raise RegistryError(f"duplicate id: {tpl.id}")
        registry.templates[tpl.id] = tpl
        for s in sorted(tpl.sensors):
            registry.by_sensor.setdefault(s, []).append(tpl.id)
        for d in sorted(tpl.domains):
            registry.by_domain.setdefault(d, []).append(tpl.id)
    return registry


def find_templates(registry: Registry, sensors, domain: str) -> list[Template]:
    """Templates sharing a sensor with ``sensors`` and tagged with ``domain``.

    Ordered by descending number of shared sensors, then by id.
    """
    wanted = {s.strip().casefold() for s in sensors if s and s.strip()}
    if not wanted:
        raise RegistryError("no sensors given")
    if not domain or not domain.strip():
        raise RegistryError("no domain given")
    domain = domain.strip().casefold()
    hits = []
    for tid in registry.by_domain.get(domain, []):
        tpl = registry.templates[tid]
        overlap = len(tpl.sensors & wanted)
        if overlap:
            hits.append((-overlap, tid, tpl))
    return [tpl for _, _, tpl in sorted(hits, key=lambda h: (h[0], h[1]))]


def _read(root: Path, rel: str) -> tuple[Path, str]:
    path = (root / rel)
    try:
        return path, path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RegistryError(f"{rel}: {exc.strerror or exc}") from None


def materialize(registry: Registry, template_id: str) -> TemplateBundle:
    tpl = registry.templates.get(template_id)
    if tpl is None:
        raise UnknownTemplate(f"unknown template: {template_id}")
    root = registry.root

    def graphs(paths):
        parsed = []
        for rel in paths:
            _, text = _read(root, rel)
            try:
                parsed.append(parse_ntriples(text)[0])
            except ParseError as exc:
                raise RegistryError(f"{rel}: {exc}") from None
        return merge(Graph(), parsed)

    ontology = graphs(tpl.ontology_paths)
    dataset = graphs(tpl.dataset_paths)
    rules: list[Rule] = []
    for rel in tpl.rule_paths:
        _, text = _read(root, rel)
        try:
            rules.extend(parse_rules(text))
        except SwotError as exc:
            raise RegistryError(f"{rel}: {exc}") from None
    queries: list[Query] = []
    for rel in tpl.query_paths:
        path, text = _read(root, rel)
        try:
            queries.append(parse_query(text, name=path.stem))
        except SwotError as exc:
            raise RegistryError(f"{rel}: {exc}") from None
    _, text = _read(root, tpl.mapping_path)
    try:
        mapping = parse_mapping(text, sorted(tpl.domains)[0] if tpl.domains else "")
    except SwotError as exc:
        raise RegistryError(f"{tpl.mapping_path}: {exc}") from None
    return TemplateBundle(tpl, ontology, dataset, rules, queries, mapping)
