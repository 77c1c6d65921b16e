"""swotforge: a self-contained Semantic Web of Things prototyping engine.

SenML measurements are annotated into RDF, closed under forward-chaining
rules, and queried with a SPARQL subset to produce suggestions, all driven by
templates from a local file-based registry.
"""

from .errors import (
    AnnotationError,
    GraphError,
    ParseError,
    RegistryError,
    RuleError,
    SenMLError,
    StageError,
    SwotError,
    UnknownTemplate,
)
from .ntriples import parse_ntriples, serialize_ntriples
from .pipeline import PipelineReport, SuggestionRow, benchmark, run_pipeline
from .rdf import Blank, Graph, Iri, Literal, PrefixMap, Triple, Var, insert, match, merge
from .registry import Registry, Template, TemplateBundle, find_templates, load_registry, materialize
from .rules import Rule, explain, infer, parse_rules
from .senml import AnnotationMapping, SenMLPack, SenMLRecord, annotate, default_mapping, parse_senml
from .sparql import Query, SolutionTable, eval_filter, execute, parse_query

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "GraphError",
    "ParseError",
    "RegistryError",
    "RuleError",
    "SenMLError",
    "StageError",
    "SwotError",
    "UnknownTemplate",
    "parse_ntriples",
    "serialize_ntriples",
    "PipelineReport",
    "SuggestionRow",
    "benchmark",
    "run_pipeline",
    "Blank",
    "Graph",
    "Iri",
    "Literal",
    "PrefixMap",
    "Triple",
    "Var",
    "insert",
    "match",
    "merge",
    "Registry",
    "Template",
    "TemplateBundle",
    "find_templates",
    "load_registry",
    "materialize",
    "Rule",
    "explain",
    "infer",
    "parse_rules",
    "AnnotationMapping",
    "SenMLPack",
    "SenMLRecord",
    "annotate",
    "default_mapping",
    "parse_senml",
    "Query",
    "SolutionTable",
    "eval_filter",
    "execute",
    "parse_query",
]
