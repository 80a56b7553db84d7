"""Memory models as rule lists, and consistency checking.

A model is a list of named rules.  Almost every rule demands that some
relational expression is irreflexive; the remaining kind demands that
mo is a strict total order over the writes.

The two read-reorder models (sc_rr, sc_rr_ext) subtract the a_rr
pattern from their rb-cycle rules.  By default the subtraction is
path-sensitive: a cycle through a read u is excused only when the
concrete cycle itself carries an external read-from edge onto a plain
read of another location, which is what lets reordered-read behaviors
through without also excusing unrelated cycles that merely share
endpoints with an excusable one.  The coarser pairwise set difference
(drop every cycle whose endpoint pair appears in a_rr) is available as
arr_semantics="pairwise"; the model DSL's `\\` operator is always the
plain pairwise difference.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .execution import Execution, derived_relations, enumerate_candidates
from .relalg import (
    ATOM_NAMES,
    Atom,
    Closure,
    Compose,
    Diff,
    EvalEnv,
    IdFilter,
    LocBound,
    Opt,
    Relation,
    Union,
    atom,
    eval_expr,
    hb_expr,
    is_strict_total_order,
    label_key,
    reflexive_witness,
    render_expr,
    _shortest_path,
)


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class ConsistencyRule:
    """One rule: irreflexivity of body, or mo totality (body None).

    excused_prefix marks rules of shape `prefix;hb \\ a_rr` that the
    path-sensitive checker handles specially; it holds the expressions
    composed before the hb tail (rb, or rb and mo)."""

    name: str
    body: Optional[object] = None
    excused_prefix: Optional[tuple] = None

    @property
    def is_mo_total(self) -> bool:
        return self.body is None

    def render(self) -> str:
        if self.is_mo_total:
            return f"{self.name} : mo_total"
        return f"{self.name} : irreflexive {render_expr(self.body)}"


@dataclass(frozen=True)
class MemoryModel:
    name: str
    rules: tuple
    arr_semantics: str = "path"  # path | pairwise

    def __post_init__(self):
        names = [r.name for r in self.rules]
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate rule names in model {self.name}")
        if not self.rules:
            raise ModelError(f"model {self.name} has no rules")
        if self.arr_semantics not in ("path", "pairwise"):
            raise ModelError(f"unknown a_rr semantics {self.arr_semantics!r}")

    def rule(self, name: str) -> ConsistencyRule:
        for r in self.rules:
            if r.name == name:
                return r
        raise ModelError(f"model {self.name} has no rule {name!r}")

    def describe(self) -> str:
        return "\n".join(r.render() for r in self.rules)


@dataclass
class ConsistencyVerdict:
    consistent: bool
    violations: list = field(default_factory=list)  # (rule name, cycle path)

    def violated_rules(self):
        return [name for name, _ in self.violations]


# ---------------------------------------------------------------------------
# Builtin models
# ---------------------------------------------------------------------------


def _irr(name, *parts):
    return ConsistencyRule(name, parts[0] if len(parts) == 1 else Compose(tuple(parts)))


def builtin_model(
    name: str,
    arr_semantics: str = "path",
    general_afrr: bool = False,
) -> MemoryModel:
    """sc, tso, sc_rr, sc_rr_ext, or porf."""
    hb = hb_expr()
    rb = atom("rb")
    mo = atom("mo")
    if name == "sc":
        rules = (
            ConsistencyRule("a"),
            _irr("b", hb),
            _irr("c", mo, hb),
            _irr("d", rb, hb),
            _irr("e", rb, mo, hb),
        )
    elif name == "tso":
        rules = (
            ConsistencyRule("a"),
            _irr("b", hb),
            _irr("c", mo, hb),
            _irr("d", rb, hb),
            _irr("e", rb, mo, atom("rfe"), atom("po")),
        )
    elif name in ("sc_rr", "sc_rr_ext"):
        arr = LocBound("a_rr")
        rules = [
            ConsistencyRule("a"),
            _irr("b", hb),
            _irr("c", mo, hb),
            ConsistencyRule(
                "d", Diff(Compose((rb, hb)), arr), excused_prefix=(rb,)
            ),
            ConsistencyRule(
                "e", Diff(Compose((rb, mo, hb)), arr), excused_prefix=(rb, mo)
            ),
        ]
        if name == "sc_rr_ext":
            rules.append(_irr("f", rb, mo))
            rules.append(
                _irr("g", LocBound("a_frr_gen" if general_afrr else "a_frr"))
            )
        rules = tuple(rules)
    elif name == "porf":
        rules = (_irr("porf", hb),)
    else:
        raise ModelError(f"unknown model {name!r}")
    return MemoryModel(name, rules, arr_semantics)


BUILTIN_MODELS = ("sc", "tso", "sc_rr", "sc_rr_ext", "porf")


# ---------------------------------------------------------------------------
# Consistency checking
# ---------------------------------------------------------------------------


def _mo_total_violation(env: EvalEnv):
    mo = env.relation("mo")
    writes = sorted(env.writes, key=label_key)
    if is_strict_total_order(mo.restrict(writes), writes):
        return None
    closed = mo.closure()
    refl = sorted(closed.reflexives(), key=label_key)
    if refl:
        start = refl[0]
        nodes = _shortest_path(mo, start, start)
        path = [start]
        for node in nodes or [start]:
            path += ["mo", node]
        return path
    for i, a in enumerate(writes):
        for b in writes[i + 1 :]:
            if (a, b) not in mo and (b, a) not in mo:
                return [a, "unordered", b]
    return ["mo", "not-strict"]


def _excused_hb(env: EvalEnv, want_loc):
    """hb with the excusing rfe edges removed: external reads-from onto
    a plain read of a location other than want_loc."""
    base = env.relation("po").union(env.relation("rf"))
    drop = [
        (w, r)
        for (w, r) in env.relation("rfe").pairs()
        if r in env.plain_reads and env.loc.get(r) != want_loc
    ]
    if not drop:
        return base.closure(), base
    reduced = base.difference(Relation.from_pairs(env.universe, drop))
    return reduced.closure(), reduced


def _hb_path_witness(chain_rel, start, end, po, rf):
    """Expand an hb stretch into po/rf hops inside a concrete graph."""
    nodes = _shortest_path(chain_rel, start, end)
    out = []
    prev = start
    for node in nodes:
        out.append("po" if (prev, node) in po else "rf")
        out.append(node)
        prev = node
    return out


def _check_excused_rule(rule: ConsistencyRule, env: EvalEnv):
    """Path-sensitive `prefix;hb minus a_rr`: a cycle at read u is
    excused only when its own hb stretch uses an rfe edge onto a plain
    read of another location.  Cycles at rmw or final reads have no
    excuse."""
    po = env.relation("po")
    rf = env.relation("rf")
    full_graph = po.union(rf)
    hb_full = full_graph.closure()
    prefix_rels = [eval_expr(p, env) for p in rule.excused_prefix]
    prefix = prefix_rels[0]
    for r in prefix_rels[1:]:
        prefix = prefix.compose(r)
    suspects = [
        u for u in prefix.compose(hb_full).reflexives() if u in env.reads
    ]
    for u in sorted(suspects, key=label_key):
        if u in env.plain_reads:
            hb_u, graph = _excused_hb(env, env.loc.get(u))
        else:
            hb_u, graph = hb_full, full_graph
        if (u, u) not in prefix.compose(hb_u):
            continue
        # witness: u -prefix hops-> w -(po/rf)*-> u in the graph that
        # lacks the excusing edges
        names = [render_expr(p) for p in rule.excused_prefix]
        path = [u]
        node = u
        for i, rel in enumerate(prefix_rels):
            rest = hb_u
            for r in reversed(prefix_rels[i + 1 :]):
                rest = r.compose(rest)
            node = next(
                v
                for v in sorted(rel.successors(node), key=label_key)
                if (v, u) in rest
            )
            path += [names[i], node]
        path.extend(_hb_path_witness(graph, node, u, po, rf))
        return path
    return None


def check_consistent(
    m: MemoryModel, e: Execution, stop_early: bool = False
) -> ConsistencyVerdict:
    """Evaluate every rule of m over the execution's derived relations.
    Consistency never requires the execution to be a candidate."""
    env = derived_relations(e)
    violations = []
    for rule in m.rules:
        cyc = None
        if rule.is_mo_total:
            cyc = _mo_total_violation(env)
        elif rule.excused_prefix is not None and m.arr_semantics == "path":
            cyc = _check_excused_rule(rule, env)
        else:
            body = eval_expr(rule.body, env)
            if not body.is_irreflexive():
                parts = (
                    rule.body.parts
                    if isinstance(rule.body, Compose)
                    else (rule.body,)
                )
                cyc = reflexive_witness(parts, env)
        if cyc is not None:
            violations.append((rule.name, cyc))
            if stop_early:
                break
    return ConsistencyVerdict(not violations, violations)


def is_consistent(m: MemoryModel, e: Execution) -> bool:
    return check_consistent(m, e, stop_early=True).consistent


def violated_rule_names(m: MemoryModel, e: Execution) -> frozenset:
    """Names of the rules e violates.  Cheaper than check_consistent
    when only the rule split matters, not the cycle witnesses."""
    env = derived_relations(e)
    out = []
    for rule in m.rules:
        if rule.is_mo_total:
            bad = _mo_total_violation(env) is not None
        elif rule.excused_prefix is not None and m.arr_semantics == "path":
            bad = _check_excused_rule(rule, env) is not None
        else:
            bad = not eval_expr(rule.body, env).is_irreflexive()
        if bad:
            out.append(rule.name)
    return frozenset(out)


def partition(m: MemoryModel, p, limit=None):
    """Split the candidates of a pre-trace into (consistent,
    inconsistent) lists, preserving enumeration order."""
    kwargs = {} if limit is None else {"limit": limit}
    good, bad = [], []
    for c in enumerate_candidates(p, **kwargs):
        (good if is_consistent(m, c) else bad).append(c)
    return good, bad


def consistent_executions(m: MemoryModel, p, limit=None):
    return partition(m, p, limit)[0]


# ---------------------------------------------------------------------------
# Model DSL
# ---------------------------------------------------------------------------

_DSL_TOKEN = re.compile(
    r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[;|\\?+()\[\]]))"
)

_CLASS_NAMES = ("R", "W", "rmw", "frr", "plain", "final")
_PATTERN_NAMES = ("a_rr", "a_frr", "a_frr_gen", "rmw_mid")


class _ExprParser:
    """expr := union (\\ union)* ; union := seq (| seq)* ;
    seq := postfix (; postfix)* ; postfix := primary [?+]*"""

    def __init__(self, text):
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _DSL_TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ModelError(f"bad expression near {text[pos:]!r}")
            if m.group("name"):
                self.toks.append(("name", m.group("name")))
            else:
                self.toks.append((m.group("op"), m.group("op")))
            pos = m.end()
        self.pos = 0

    def peek(self):
        return self.toks[self.pos][0] if self.pos < len(self.toks) else None

    def take(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def parse(self):
        e = self.diff()
        if self.peek() is not None:
            raise ModelError(f"trailing tokens after expression: {self.toks[self.pos:]}")
        return e

    def diff(self):
        left = self.union()
        while self.peek() == "\\":
            self.take()
            left = Diff(left, self.union())
        return left

    def union(self):
        parts = [self.seq()]
        while self.peek() == "|":
            self.take()
            parts.append(self.seq())
        return parts[0] if len(parts) == 1 else Union(tuple(parts))

    def seq(self):
        parts = [self.postfix()]
        while self.peek() == ";":
            self.take()
            parts.append(self.postfix())
        return parts[0] if len(parts) == 1 else Compose(tuple(parts))

    def postfix(self):
        e = self.primary()
        while self.peek() in ("?", "+"):
            op, _ = self.take()
            e = Opt(e) if op == "?" else Closure(e)
        return e

    def primary(self):
        kind = self.peek()
        if kind == "(":
            self.take()
            e = self.diff()
            if self.peek() != ")":
                raise ModelError("unbalanced parenthesis in expression")
            self.take()
            return e
        if kind == "[":
            self.take()
            tok = self.take()
            if tok[0] != "name" or tok[1] not in _CLASS_NAMES:
                raise ModelError(f"unknown event class {tok[1]!r}")
            if self.peek() != "]":
                raise ModelError("unbalanced bracket in expression")
            self.take()
            return IdFilter(tok[1])
        if kind == "name":
            _, word = self.take()
            if word == "hb":
                return hb_expr()
            if word in _PATTERN_NAMES:
                return LocBound(word)
            if word in ATOM_NAMES:
                return Atom(word)
            raise ModelError(f"unknown relation name {word!r}")
        raise ModelError("expected an expression")


def parse_rule_expr(text: str):
    return _ExprParser(text).parse()


def parse_model_dsl(text: str, name: str = "user") -> MemoryModel:
    """One rule per line: `name : irreflexive <expr>` or
    `name : mo_total`.  Blank lines and # comments are skipped.  The
    difference operator here is always the pairwise set difference."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.+)$", line)
        if not m:
            raise ModelError(f"line {lineno}: expected `name : rule`")
        rname, body = m.group(1), m.group(2).strip()
        if body == "mo_total":
            rules.append(ConsistencyRule(rname))
            continue
        if body.startswith("irreflexive"):
            expr_text = body[len("irreflexive") :].strip()
            if not expr_text:
                raise ModelError(f"line {lineno}: missing expression")
            try:
                rules.append(ConsistencyRule(rname, parse_rule_expr(expr_text)))
            except ModelError as err:
                raise ModelError(f"line {lineno}: {err}") from None
            continue
        raise ModelError(
            f"line {lineno}: rule kind must be `irreflexive <expr>` or `mo_total`"
        )
    if not rules:
        raise ModelError("model file defines no rules")
    return MemoryModel(name, tuple(rules), arr_semantics="pairwise")
