"""Binary relations over small event universes, and the expression
language used to write consistency rules.

Relations are kept dense: a universe of at most a few dozen event labels
and one bitmask row per event.  That is enough for litmus-sized inputs
and keeps composition/closure cheap inside the enumeration sweeps.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union as TUnion


class RelAlgError(Exception):
    pass


_NAT_SPLIT = re.compile(r"(\d+)")


def label_key(label: str):
    """Natural-order sort key: 'A10' sorts after 'A2'."""
    parts = _NAT_SPLIT.split(label)
    return tuple(int(p) if p.isdigit() else p for p in parts)


class Relation:
    """A binary relation over a fixed, ordered universe of labels."""

    __slots__ = ("universe", "index", "rows")

    def __init__(self, universe, rows=None):
        self.universe = tuple(universe)
        self.index = {e: i for i, e in enumerate(self.universe)}
        if len(self.index) != len(self.universe):
            raise RelAlgError("duplicate labels in universe")
        if rows is None:
            rows = (0,) * len(self.universe)
        self.rows = tuple(rows)
        if len(self.rows) != len(self.universe):
            raise RelAlgError("row count does not match universe")

    @classmethod
    def from_pairs(cls, universe, pairs) -> "Relation":
        r = cls(universe)
        idx = r.index
        rows = [0] * len(r.universe)
        for a, b in pairs:
            if a not in idx or b not in idx:
                raise RelAlgError(f"pair ({a}, {b}) outside universe")
            rows[idx[a]] |= 1 << idx[b]
        return cls(r.universe, rows)

    def pairs(self) -> frozenset:
        out = []
        for i, row in enumerate(self.rows):
            a = self.universe[i]
            while row:
                low = row & -row
                out.append((a, self.universe[low.bit_length() - 1]))
                row ^= low
        return frozenset(out)

    def __contains__(self, pair) -> bool:
        a, b = pair
        ia = self.index.get(a)
        ib = self.index.get(b)
        if ia is None or ib is None:
            return False
        return bool(self.rows[ia] >> ib & 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Relation):
            return NotImplemented
        if self.universe == other.universe:
            return self.rows == other.rows
        return set(self.universe) == set(other.universe) and set(
            self.pairs()
        ) == set(other.pairs())

    def __hash__(self):
        return hash((frozenset(self.universe), frozenset(self.pairs())))

    def __len__(self) -> int:
        return sum(row.bit_count() for row in self.rows)

    def __repr__(self):
        return f"Relation({sorted(self.pairs())})"

    def successors(self, a) -> list:
        row = self.rows[self.index[a]]
        out = []
        while row:
            low = row & -row
            out.append(self.universe[low.bit_length() - 1])
            row ^= low
        return out

    def _check_same(self, other: "Relation"):
        if self.universe != other.universe:
            raise RelAlgError("universe mismatch between relations")

    def union(self, other: "Relation") -> "Relation":
        self._check_same(other)
        return Relation(self.universe, tuple(a | b for a, b in zip(self.rows, other.rows)))

    def difference(self, other: "Relation") -> "Relation":
        self._check_same(other)
        return Relation(self.universe, tuple(a & ~b for a, b in zip(self.rows, other.rows)))

    def intersect(self, other: "Relation") -> "Relation":
        self._check_same(other)
        return Relation(self.universe, tuple(a & b for a, b in zip(self.rows, other.rows)))

    def compose(self, other: "Relation") -> "Relation":
        self._check_same(other)
        out = []
        orows = other.rows
        for row in self.rows:
            acc = 0
            r = row
            while r:
                low = r & -r
                acc |= orows[low.bit_length() - 1]
                r ^= low
            out.append(acc)
        return Relation(self.universe, out)

    def inverse(self) -> "Relation":
        n = len(self.universe)
        out = [0] * n
        for i, row in enumerate(self.rows):
            bit = 1 << i
            r = row
            while r:
                low = r & -r
                out[low.bit_length() - 1] |= bit
                r ^= low
        return Relation(self.universe, out)

    def optional(self) -> "Relation":
        return Relation(
            self.universe, tuple(row | (1 << i) for i, row in enumerate(self.rows))
        )

    def closure(self) -> "Relation":
        # Warshall over bitmask rows.
        rows = list(self.rows)
        n = len(rows)
        for k in range(n):
            bit = 1 << k
            rk = rows[k]
            for i in range(n):
                if rows[i] & bit:
                    rows[i] |= rk
        return Relation(self.universe, rows)

    def restrict(self, domain: Iterable, codomain: Optional[Iterable] = None) -> "Relation":
        dom_mask = 0
        for e in domain:
            dom_mask |= 1 << self.index[e]
        cod_mask = dom_mask
        if codomain is not None:
            cod_mask = 0
            for e in codomain:
                cod_mask |= 1 << self.index[e]
        out = []
        for i, row in enumerate(self.rows):
            out.append(row & cod_mask if dom_mask >> i & 1 else 0)
        return Relation(self.universe, out)

    def is_irreflexive(self) -> bool:
        return all(not (row >> i & 1) for i, row in enumerate(self.rows))

    def reflexives(self) -> list:
        return [self.universe[i] for i, row in enumerate(self.rows) if row >> i & 1]

    def is_transitive(self) -> bool:
        return self == self.union(self.compose(self))

    def is_acyclic(self) -> bool:
        return self.closure().is_irreflexive()

    def transitive_reduction(self) -> "Relation":
        """Smallest relation with the same closure.  Unique for acyclic
        relations; cyclic input is rejected."""
        closed = self.closure()
        if not closed.is_irreflexive():
            raise RelAlgError("transitive reduction needs an acyclic relation")
        out = []
        for row in closed.rows:
            redundant = 0
            m = row
            while m:
                j = (m & -m).bit_length() - 1
                redundant |= closed.rows[j]
                m &= m - 1
            out.append(row & ~redundant)
        return Relation(self.universe, out)


def identity_on(universe, members) -> Relation:
    r = Relation(universe)
    rows = [0] * len(r.universe)
    for e in members:
        i = r.index.get(e)
        if i is None:
            raise RelAlgError(f"label {e} outside universe")
        rows[i] = 1 << i
    return Relation(r.universe, rows)


def is_strict_total_order(r: Relation, domain: Iterable) -> bool:
    dom = list(domain)
    for a in dom:
        if (a, a) in r:
            return False
    if not r.is_transitive():
        return False
    for i, a in enumerate(dom):
        for b in dom[i + 1 :]:
            if (a, b) not in r and (b, a) not in r:
                return False
    return True


# --------------------------------------------------------------------------
# Expression AST
# --------------------------------------------------------------------------

ATOM_NAMES = ("po", "rf", "rfi", "rfe", "mo", "mo_loc", "rb")

# Identity-filter classes: reads, writes, rmw events, read-read fences,
# plain reads (non-rmw, non-final) and final-state reads.
FILTER_CLASSES = ("R", "W", "rmw", "frr", "plain", "final")


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class IdFilter:
    cls: TUnion[str, frozenset]


@dataclass(frozen=True)
class Compose:
    parts: tuple


@dataclass(frozen=True)
class Union:
    parts: tuple


@dataclass(frozen=True)
class Inverse:
    arg: object


@dataclass(frozen=True)
class Opt:
    arg: object


@dataclass(frozen=True)
class Closure:
    arg: object


@dataclass(frozen=True)
class Diff:
    left: object
    right: object


@dataclass(frozen=True)
class LocBound:
    """Built-in patterns that bind read events by location.

    a_rr       rb ; mo? ; hb? ; rfe ; [plain read of l] ; hb ; [plain read not of l]
    a_frr      rb ; mo ; rfe ; [plain read of l] ; po ; [frr] ; po ; [plain read not of l]
    a_frr_gen  a_frr with the optional mo/hb hops of a_rr
    rmw_mid    rb ; mo? ; [rmw] ; po ; [read]
    """

    kind: str


RelExpr = object  # any of the node classes above


def atom(name: str) -> Atom:
    if name not in ATOM_NAMES:
        raise RelAlgError(f"unknown atom {name!r}")
    return Atom(name)


def hb_expr() -> Closure:
    return Closure(Union((Atom("po"), Atom("rf"))))


@dataclass
class EvalEnv:
    """Evaluation environment: base relations plus event classification."""

    relations: dict
    universe: tuple
    loc: dict = field(default_factory=dict)
    reads: frozenset = frozenset()
    writes: frozenset = frozenset()
    rmws: frozenset = frozenset()
    fences_rr: frozenset = frozenset()
    plain_reads: frozenset = frozenset()
    final_reads: frozenset = frozenset()

    def relation(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise RelAlgError(f"atom {name!r} not bound in environment") from None

    def class_members(self, cls) -> frozenset:
        if isinstance(cls, frozenset):
            return cls
        table = {
            "R": self.reads,
            "W": self.writes,
            "rmw": self.rmws,
            "frr": self.fences_rr,
            "plain": self.plain_reads,
            "final": self.final_reads,
        }
        try:
            return table[cls]
        except KeyError:
            raise RelAlgError(f"unknown filter class {cls!r}") from None

    def empty(self) -> Relation:
        return Relation(self.universe)


def eval_expr(expr: RelExpr, env: EvalEnv) -> Relation:
    if isinstance(expr, Atom):
        return env.relation(expr.name)
    if isinstance(expr, IdFilter):
        return identity_on(env.universe, env.class_members(expr.cls))
    if isinstance(expr, Compose):
        acc = None
        for part in expr.parts:
            r = eval_expr(part, env)
            acc = r if acc is None else acc.compose(r)
        return acc if acc is not None else env.empty()
    if isinstance(expr, Union):
        acc = env.empty()
        for part in expr.parts:
            acc = acc.union(eval_expr(part, env))
        return acc
    if isinstance(expr, Inverse):
        return eval_expr(expr.arg, env).inverse()
    if isinstance(expr, Opt):
        return eval_expr(expr.arg, env).optional()
    if isinstance(expr, Closure):
        return eval_expr(expr.arg, env).closure()
    if isinstance(expr, Diff):
        return eval_expr(expr.left, env).difference(eval_expr(expr.right, env))
    if isinstance(expr, LocBound):
        return eval_locbound(expr.kind, env)
    raise RelAlgError(f"not a relation expression: {expr!r}")


def eval_locbound(kind: str, env: EvalEnv) -> Relation:
    rb = env.relation("rb")
    mo = env.relation("mo")
    po = env.relation("po")
    rfe = env.relation("rfe")
    hb = po.union(env.relation("rf")).closure()
    acc = env.empty()

    if kind == "a_rr":
        # Union over presence/absence of the mo and first-hb hops, and over
        # every ordered pair of plain reads with distinct locations.
        prefix = rb.compose(mo.optional()).compose(hb.optional()).compose(rfe)
        for rx in env.plain_reads:
            mid = prefix.restrict(env.universe, [rx]).compose(hb)
            targets = [
                ry
                for ry in env.plain_reads
                if env.loc.get(ry) != env.loc.get(rx)
            ]
            acc = acc.union(mid.restrict(env.universe, targets))
        return acc

    if kind == "a_frr":
        frr = env.fences_rr
        prefix = rb.compose(mo).compose(rfe)
        for rx in env.plain_reads:
            mid = (
                prefix.restrict(env.universe, [rx])
                .compose(po)
                .restrict(env.universe, frr)
                .compose(po)
            )
            targets = [
                ry
                for ry in env.plain_reads
                if env.loc.get(ry) != env.loc.get(rx)
            ]
            acc = acc.union(mid.restrict(env.universe, targets))
        return acc

    if kind == "a_frr_gen":
        # like a_frr with the a_rr-style optional mo and hb hops
        frr = env.fences_rr
        prefix = rb.compose(mo.optional()).compose(hb.optional()).compose(rfe)
        for rx in env.plain_reads:
            mid = (
                prefix.restrict(env.universe, [rx])
                .compose(po)
                .restrict(env.universe, frr)
                .compose(po)
            )
            targets = [
                ry
                for ry in env.plain_reads
                if env.loc.get(ry) != env.loc.get(rx)
            ]
            acc = acc.union(mid.restrict(env.universe, targets))
        return acc

    if kind == "rmw_mid":
        return (
            rb.compose(mo.optional())
            .restrict(env.universe, env.rmws)
            .compose(po)
            .restrict(env.universe, env.reads)
        )

    raise RelAlgError(f"unknown location-bound pattern {kind!r}")


def locbound_exprs(kind: str, env: EvalEnv) -> Iterator[RelExpr]:
    """The location-bound patterns as plain expression trees, one per
    bound read.  Their union must equal eval_locbound; keeping the two
    in step is covered by tests."""
    hb = hb_expr()
    if kind in ("a_rr", "a_frr", "a_frr_gen"):
        if kind == "a_frr":
            prefix = (Atom("rb"), Atom("mo"), Atom("rfe"))
        else:
            prefix = (Atom("rb"), Opt(Atom("mo")), Opt(hb), Atom("rfe"))
        for rx in sorted(env.plain_reads, key=label_key):
            targets = frozenset(
                ry
                for ry in env.plain_reads
                if env.loc.get(ry) != env.loc.get(rx)
            )
            if kind == "a_rr":
                tail = (IdFilter(frozenset({rx})), hb, IdFilter(targets))
            else:
                tail = (
                    IdFilter(frozenset({rx})),
                    Atom("po"),
                    IdFilter(frozenset(env.fences_rr)),
                    Atom("po"),
                    IdFilter(targets),
                )
            yield Compose(prefix + tail)
        return
    if kind == "rmw_mid":
        yield Compose(
            (
                Atom("rb"),
                Opt(Atom("mo")),
                IdFilter(frozenset(env.rmws)),
                Atom("po"),
                IdFilter(frozenset(env.reads)),
            )
        )
        return
    raise RelAlgError(f"unknown location-bound pattern {kind!r}")


# --------------------------------------------------------------------------
# Edge-marked evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkedRelation:
    """A relation together with the subset of its pairs that admit at
    least one derivation through a designated set of base edges."""

    full: Relation
    marked: Relation

    def compose(self, other: "MarkedRelation") -> "MarkedRelation":
        return MarkedRelation(
            self.full.compose(other.full),
            self.marked.compose(other.full).union(
                self.full.compose(other.marked)
            ),
        )

    def union(self, other: "MarkedRelation") -> "MarkedRelation":
        return MarkedRelation(
            self.full.union(other.full), self.marked.union(other.marked)
        )

    def inverse(self) -> "MarkedRelation":
        return MarkedRelation(self.full.inverse(), self.marked.inverse())

    def optional(self) -> "MarkedRelation":
        return MarkedRelation(self.full.optional(), self.marked)

    def closure(self) -> "MarkedRelation":
        plus = self.full.closure()
        star = plus.optional()
        return MarkedRelation(
            plus, star.compose(self.marked).compose(star)
        )

    def difference(self, rel: Relation) -> "MarkedRelation":
        return MarkedRelation(
            self.full.difference(rel), self.marked.difference(rel)
        )


def eval_expr_marked(expr: RelExpr, env: EvalEnv, marks: dict) -> MarkedRelation:
    """eval_expr with witness tracking.  marks maps atom names to the
    sub-relation whose pairs count as marked; derived pairs are marked
    when some derivation passes through a marked pair."""
    if isinstance(expr, Atom):
        return MarkedRelation(
            env.relation(expr.name), marks.get(expr.name, env.empty())
        )
    if isinstance(expr, IdFilter):
        return MarkedRelation(
            identity_on(env.universe, env.class_members(expr.cls)),
            env.empty(),
        )
    if isinstance(expr, Compose):
        acc = None
        for part in expr.parts:
            m = eval_expr_marked(part, env, marks)
            acc = m if acc is None else acc.compose(m)
        if acc is None:
            return MarkedRelation(env.empty(), env.empty())
        return acc
    if isinstance(expr, Union):
        acc = MarkedRelation(env.empty(), env.empty())
        for part in expr.parts:
            acc = acc.union(eval_expr_marked(part, env, marks))
        return acc
    if isinstance(expr, Inverse):
        return eval_expr_marked(expr.arg, env, marks).inverse()
    if isinstance(expr, Opt):
        return eval_expr_marked(expr.arg, env, marks).optional()
    if isinstance(expr, Closure):
        return eval_expr_marked(expr.arg, env, marks).closure()
    if isinstance(expr, Diff):
        right = eval_expr(expr.right, env)
        return eval_expr_marked(expr.left, env, marks).difference(right)
    if isinstance(expr, LocBound):
        acc = MarkedRelation(env.empty(), env.empty())
        for sub in locbound_exprs(expr.kind, env):
            acc = acc.union(eval_expr_marked(sub, env, marks))
        return acc
    raise RelAlgError(f"not a relation expression: {expr!r}")


# --------------------------------------------------------------------------
# Witness extraction
# --------------------------------------------------------------------------


def render_expr(expr: RelExpr) -> str:
    if isinstance(expr, Atom):
        return expr.name
    if isinstance(expr, IdFilter):
        cls = expr.cls
        if isinstance(cls, frozenset):
            return "[" + ",".join(sorted(cls, key=label_key)) + "]"
        return f"[{cls}]"
    if isinstance(expr, Compose):
        return ";".join(_render_tight(p) for p in expr.parts)
    if isinstance(expr, Union):
        return "|".join(_render_tight(p) for p in expr.parts)
    if isinstance(expr, Inverse):
        return _render_tight(expr.arg) + "^-1"
    if isinstance(expr, Opt):
        return _render_tight(expr.arg) + "?"
    if isinstance(expr, Closure):
        return _render_tight(expr.arg) + "+"
    if isinstance(expr, Diff):
        return _render_tight(expr.left) + r" \ " + _render_tight(expr.right)
    if isinstance(expr, LocBound):
        return expr.kind
    return repr(expr)


def _render_tight(expr: RelExpr) -> str:
    text = render_expr(expr)
    if isinstance(expr, (Compose, Union, Diff)):
        return "(" + text + ")"
    return text


def _expand_hop(expr: RelExpr, env: EvalEnv, a, b) -> list:
    """Expand one hop (a, b) justified by expr into labeled base steps.

    Returns a list of (label, event) steps leading from a to b.  Falls back
    to a single step labeled with the rendered expression.
    """
    if isinstance(expr, Atom):
        return [(expr.name, b)]
    if isinstance(expr, Opt):
        if a == b:
            return []
        return _expand_hop(expr.arg, env, a, b)
    if isinstance(expr, Union):
        for part in expr.parts:
            if (a, b) in eval_expr(part, env):
                return _expand_hop(part, env, a, b)
    if isinstance(expr, Closure):
        inner = expr.arg
        rel = eval_expr(inner, env)
        path = _shortest_path(rel, a, b)
        if path is not None:
            steps = []
            prev = a
            for nxt in path:
                steps.extend(_expand_hop(inner, env, prev, nxt))
                prev = nxt
            return steps
    return [(render_expr(expr), b)]


def _shortest_path(rel: Relation, a, b) -> Optional[list]:
    """Shortest nonempty edge path from a to b, deterministic tie-break.

    Returns the node sequence after a (ending in b), or None.
    """
    parents = {}
    frontier = []
    for v in sorted(rel.successors(a), key=label_key):
        if v == b:
            return [v]
        if v not in parents:
            parents[v] = None
            frontier.append(v)
    while frontier:
        nxt_frontier = []
        for u in frontier:
            for v in sorted(rel.successors(u), key=label_key):
                if v == b:
                    seq = [u]
                    while parents[seq[-1]] is not None:
                        seq.append(parents[seq[-1]])
                    return list(reversed(seq)) + [v]
                if v not in parents and v != a:
                    parents[v] = u
                    nxt_frontier.append(v)
        frontier = nxt_frontier
    return None


def reflexive_witness(parts, env: EvalEnv) -> Optional[list]:
    """Find one cyclic path through the sequential composition of parts.

    Returns an alternating list [e0, rel, e1, rel, ..., e0] naming the base
    relation justifying each hop, or None when the composition is
    irreflexive.  Deterministic: lowest canonical start label first, then
    shortest expansion of each composite hop.
    """
    rels = [eval_expr(p, env) for p in parts]
    comp = None
    for r in rels:
        comp = r if comp is None else comp.compose(r)
    if comp is None or comp.is_irreflexive():
        return None

    start = min(comp.reflexives(), key=label_key)

    # Work out one chain of intermediate events via layered reachability.
    # suffix_rel[i] = rels[i] ; ... ; rels[k-1]
    k = len(rels)
    suffix_rel = [None] * (k + 1)
    acc = None
    for i in range(k - 1, -1, -1):
        acc = rels[i] if acc is None else rels[i].compose(acc)
        suffix_rel[i] = acc

    chain = [start]
    cur = start
    for i in range(k - 1):
        nxt_ok = []
        for v in rels[i].successors(cur):
            if (v, start) in suffix_rel[i + 1]:
                nxt_ok.append(v)
        if not nxt_ok:
            return None  # should not happen; comp said reachable
        cur = min(nxt_ok, key=label_key)
        chain.append(cur)
    chain.append(start)

    path = [start]
    for i in range(k):
        steps = _expand_hop(parts[i], env, chain[i], chain[i + 1])
        for lbl, ev in steps:
            path.append(lbl)
            path.append(ev)
    if len(path) == 1:
        # every hop was a skipped optional; cannot happen for irreflexive
        # rule bodies, guard anyway
        path.extend(["id", start])
    return path


def closure_oracle(rel: Relation) -> Relation:
    """Transitive closure by repeated matrix powers (test oracle)."""
    n = len(rel.universe)
    acc = rel
    power = rel
    for _ in range(n):
        power = power.compose(rel)
        acc = acc.union(power)
    return acc
