"""Naive fixpoint used to cross-check the semi-naive engine.

Re-evaluates every rule against the whole fact set until nothing changes.
Matching is a plain scan over a Python set, sharing nothing with the indexed
graph or the join planner in :mod:`swotforge.rules`.
"""

from __future__ import annotations

from typing import Iterable

from .rdf import Blank, Iri, Triple, Var
from .rules import Builtin, Pattern, Rule, check_builtin


def _matches(pattern: Pattern, facts, binding):
    for t in facts:
        env = dict(binding)
        ok = True
        for x, value in zip(pattern, t):
            if isinstance(x, Var):
                if x.name in env and env[x.name] != value:
                    ok = False
                    break
                env[x.name] = value
            elif x != value:
                ok = False
                break
        if ok:
            yield env


def _bindings(rule: Rule, facts):
    envs = [{}]
    for atom in rule.body:
        if isinstance(atom, Pattern):
            envs = [e for env in envs for e in _matches(atom, facts, env)]
    for atom in rule.body:
        if isinstance(atom, Builtin):
            envs = [env for env in envs if check_builtin(atom, env, rule.name)]
    return envs


def _ground(rule: Rule, env):
    for pat in rule.head:
        s, p, o = (env[x.name] if isinstance(x, Var) else x for x in pat)
        if isinstance(s, (Iri, Blank)) and isinstance(p, Iri):
            yield Triple(s, p, o)


def naive_closure(triples: Iterable[Triple], rules: Iterable[Rule]) -> set[Triple]:
    facts = set(triples)
    rules = list(rules)
    while True:
        snapshot = list(facts)
        derived = {t for rule in rules for env in _bindings(rule, snapshot) for t in _ground(rule, env)}
        if derived <= facts:
            return facts
        facts |= derived
