"""HTTP/1.1 JSON API over a loaded registry.

    GET  /templates?sensors=a,b&domain=d   matching templates (all when no query)
    POST /annotate[?template=id]           SenML JSON -> N-Triples
    POST /reason                           {"graph", "rules" | "rulePaths"} -> closure
    POST /query                            {"graph", "query", "format"} -> results
    POST /pipeline/{templateId}            SenML JSON -> pipeline report

``/annotate`` and ``/pipeline`` also accept ``?source=<url>`` to fetch the
SenML document instead of reading the request body.
"""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .errors import RegistryError, StageError, SwotError, UnknownTemplate
from .ntriples import parse_ntriples, serialize_ntriples
from .pipeline import run_pipeline
from .registry import Registry, find_templates
from .rules import parse_rules, saturate
from .senml import annotate, default_mapping, parse_senml
from .sparql import execute, parse_query, to_json, to_tsv

log = logging.getLogger(__name__)

FETCH_TIMEOUT = 5.0
FETCH_LIMIT = 1 << 20
BODY_LIMIT = 16 << 20


class HttpError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def fetch_source(url: str, timeout: float = FETCH_TIMEOUT, limit: int = FETCH_LIMIT) -> str:
    if urlsplit(url).scheme not in ("http", "https"):
        raise StageError("source", f"unsupported URL scheme in {url!r}")
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            data = resp.read(limit + 1)
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise StageError("source", f"cannot fetch {url}: {getattr(exc, 'reason', exc)}") from None
    if len(data) > limit:
        raise StageError("source", f"document at {url} exceeds {limit} bytes")
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        raise StageError("source", f"document at {url} is not UTF-8") from None


def _stage(stage: str, fn, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except SwotError as exc:
        raise StageError(stage, exc) from exc


def _rule_text(registry: Registry, doc: dict) -> str:
    parts = []
    if isinstance(doc.get("rules"), str):
        parts.append(doc["rules"])
    root = registry.root.resolve()
    for rel in doc.get("rulePaths", []) or []:
        path = (root / str(rel)).resolve()
        if root not in path.parents:
            raise StageError("reason", f"rule path outside the registry: {rel}")
        try:
            parts.append(path.read_text(encoding="utf-8"))
        except OSError:
            raise HttpError(404, f"reason: no such rule file: {rel}") from None
    if not parts:
        raise StageError("reason", "no rules given")
    return "\n".join(parts)


class Handler(BaseHTTPRequestHandler):
    server_version = "swotforge"
    protocol_version = "HTTP/1.1"
    registry: Registry  # set on the subclass built by make_server

    # -------------------------------------------------------------- plumbing

    def log_message(self, fmt, *args):
        log.info("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: str, content_type: str):
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _json(self, status: int, doc) -> None:
        self._send(status, json.dumps(doc, indent=2, ensure_ascii=False) + "\n", "application/json; charset=utf-8")

    def _body(self) -> str:
        length = int(self.headers.get("Content-Length") or 0)
        if length > BODY_LIMIT:
            raise HttpError(413, "request body too large")
        raw = self.rfile.read(length) if length else b""
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise HttpError(400, "request body is not UTF-8") from None

    def _json_body(self, stage: str) -> dict:
        try:
            doc = json.loads(self._body() or "{}")
        except json.JSONDecodeError as exc:
            raise StageError(stage, f"malformed JSON body: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise StageError(stage, "JSON body must be an object")
        return doc

    def _senml(self, query: dict) -> str:
        if "source" in query:
            return fetch_source(query["source"][0])
        return self._body()

    def _dispatch(self, method: str) -> None:
        url = urlsplit(self.path)
        query = parse_qs(url.query)
        try:
            route = self._route(method, url.path)
            if route is None:
                raise HttpError(404, f"no route for {method} {url.path}")
            route(query)
        except HttpError as exc:
            self._json(exc.status, {"error": exc.message})
        except UnknownTemplate as exc:
            self._json(404, {"error": str(exc)})
        except StageError as exc:
            status = 404 if isinstance(exc.cause, UnknownTemplate) else 400
            self._json(status, {"error": str(exc)})
        except SwotError as exc:
            self._json(400, {"error": str(exc)})
        except Exception:
            log.exception("unhandled error for %s %s", method, self.path)
            self._json(500, {"error": "internal server error"})

    def _route(self, method: str, path: str):
        if method == "GET" and path == "/templates":
            return self._templates
        if method == "POST":
            if path == "/annotate":
                return self._annotate
            if path == "/reason":
                return lambda q: self._reason()
            if path == "/query":
                return lambda q: self._query()
            if path.startswith("/pipeline/") and path.count("/") == 2:
                tid = path.rsplit("/", 1)[1]
                return lambda q: self._pipeline(tid, q)
        return None

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    # -------------------------------------------------------------- routes

    def _templates(self, query: dict) -> None:
        if "sensors" not in query and "domain" not in query:
            found = list(self.registry.templates.values())
        else:
            sensors = [s for v in query.get("sensors", []) for s in v.split(",")]
            domain = query.get("domain", [""])[0]
            try:
                found = find_templates(self.registry, sensors, domain)
            except RegistryError as exc:
                raise StageError("template", exc) from None
        self._json(200, [t.to_json() for t in found])

    def _annotate(self, query: dict) -> None:
        text = self._senml(query)
        if "template" in query:
            mapping = self.registry.bundle(query["template"][0]).mapping
        else:
            mapping = default_mapping()
        pack = _stage("annotate", parse_senml, text)
        graph = _stage("annotate", annotate, pack, mapping)
        self._send(200, serialize_ntriples(graph), "application/n-triples; charset=utf-8")

    def _reason(self) -> None:
        doc = self._json_body("reason")
        graph = _stage("reason", lambda: parse_ntriples(str(doc.get("graph", "")))[0])
        rules = _stage("reason", parse_rules, _rule_text(self.registry, doc))
        closure, derivations = _stage("reason", saturate, graph, rules)
        self._json(200, {
            "closure": serialize_ntriples(closure),
            "derivedTripleCount": len(closure) - len(graph),
            "derivations": [
                {"triple": d.triple.n3(), "rule": d.rule,
                 "bindings": {k: v.n3() for k, v in d.bindings.items()}}
                for d in derivations
            ],
        })

    def _query(self) -> None:
        doc = self._json_body("query")
        graph = _stage("query", lambda: parse_ntriples(str(doc.get("graph", "")))[0])
        q = _stage("query", parse_query, str(doc.get("query", "")))
        table = execute(q, graph)
        if doc.get("format", "json") == "tsv":
            self._send(200, to_tsv(table), "text/tab-separated-values; charset=utf-8")
        else:
            self._send(200, to_json(table), "application/sparql-results+json; charset=utf-8")

    def _pipeline(self, template_id: str, query: dict) -> None:
        bundle = self.registry.bundle(template_id)
        report = run_pipeline(bundle, self._senml(query))
        self._send(200, report.to_json(), "application/json; charset=utf-8")


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected host:port, got {address!r}")
    return host or "127.0.0.1", int(port)


def make_server(registry: Registry, address: str = "127.0.0.1:0") -> ThreadingHTTPServer:
    """Bound but not yet serving; call ``serve_forever`` (port 0 picks a free port)."""
    handler = type("BoundHandler", (Handler,), {"registry": registry})
    server = ThreadingHTTPServer(parse_address(address), handler)
    server.daemon_threads = True
    return server


def serve(registry: Registry, address: str) -> None:
    server = make_server(registry, address)
    host, port = server.server_address[:2]
    log.info("serving on http://%s:%d", host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
