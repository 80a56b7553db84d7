"""Transformation-effects: event/order edits on pre-traces, and safety.

An effect removes events (st_minus), adds events (st_plus), removes and
adds program-order edges (po_minus/po_plus over the reduced order), and
may renumber threads (thread inlining).  Safety of an effect under a
model asks containment of consistent behaviors: every consistent
candidate of the transformed pre-trace must have a comparable
consistent candidate of the original.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .execution import (
    Execution,
    enumerate_candidates,
    executions_comparable,
    outcome_of,
)
from .litmus import FINAL_TID, INIT_TID, Event
from .models import MemoryModel, is_consistent
from .pretrace import PreTrace, pretraces_comparable
from .relalg import Relation, label_key


class EffectError(Exception):
    pass


@dataclass(frozen=True)
class TransformationEffect:
    st_minus: frozenset = frozenset()  # Events removed
    st_plus: frozenset = frozenset()  # Events added
    po_minus: frozenset = frozenset()  # label pairs removed
    po_plus: frozenset = frozenset()  # label pairs added
    tid_remap: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "st_minus", frozenset(self.st_minus))
        object.__setattr__(self, "st_plus", frozenset(self.st_plus))
        object.__setattr__(self, "po_minus", frozenset(self.po_minus))
        object.__setattr__(self, "po_plus", frozenset(self.po_plus))

    def is_empty(self) -> bool:
        return not (
            self.st_minus or self.st_plus or self.po_minus or self.po_plus
            or self.tid_remap
        )

    def removes_writes(self) -> bool:
        return any(e.is_write for e in self.st_minus)

    def describe(self) -> str:
        bits = []
        if self.st_minus:
            bits.append("-" + ",".join(sorted(e.label for e in self.st_minus)))
        if self.st_plus:
            bits.append("+" + ",".join(sorted(e.label for e in self.st_plus)))
        for a, b in sorted(self.po_minus):
            bits.append(f"po-({a},{b})")
        for a, b in sorted(self.po_plus):
            bits.append(f"po+({a},{b})")
        if self.tid_remap:
            bits.append(
                "tid " + ",".join(f"{k}->{v}" for k, v in sorted(self.tid_remap.items()))
            )
        return " ".join(bits) if bits else "identity"


# ---------------------------------------------------------------------------
# Applying effects
# ---------------------------------------------------------------------------


def apply_effect(p: PreTrace, tr: TransformationEffect) -> PreTrace:
    """Rebuild the pre-trace after the edit.  Order semantics: take the
    transitive reduction of po over surviving events, drop po_minus,
    add po_plus, re-close, then re-impose the structural edges (init
    writes first, final reads last)."""
    minus_labels = {e.label for e in tr.st_minus}
    for e in tr.st_minus:
        if p.by_label.get(e.label) != e:
            raise EffectError(f"effect removes {e.label}, which the pre-trace lacks")
    surviving = [e for e in p.events if e.label not in minus_labels]
    surviving_labels = {e.label for e in surviving}
    for e in tr.st_plus:
        if e.label in surviving_labels:
            raise EffectError(f"effect introduces duplicate label {e.label}")
    events = list(surviving) + sorted(tr.st_plus, key=lambda e: label_key(e.label))
    remap = tr.tid_remap or {}
    events = [
        dataclasses.replace(e, tid=remap.get(e.tid, e.tid)) if e.tid in remap else e
        for e in events
    ]
    by_label = {e.label: e for e in events}
    universe = [e.label for e in events]

    reduced = p.po.restrict(surviving_labels).transitive_reduction()
    edges = set()
    for a, b in reduced.pairs():
        if (a, b) not in tr.po_minus:
            edges.add((a, b))
    for a, b in tr.po_plus:
        if a not in by_label or b not in by_label:
            raise EffectError(f"po edge ({a}, {b}) names an unknown event")
        edges.add((a, b))

    # structural edges: init writes precede every other event, final
    # reads follow every other event
    inits = [e for e in events if e.tid == INIT_TID]
    finals = [e for e in events if e.tid == FINAL_TID]
    body = [e for e in events if e.tid not in (INIT_TID, FINAL_TID)]
    for i in inits:
        for e in body + finals:
            edges.add((i.label, e.label))
    for f in finals:
        for e in body:
            edges.add((e.label, f.label))

    po = Relation.from_pairs(universe, edges).closure()
    if not po.is_irreflexive():
        cyc = sorted(po.reflexives(), key=label_key)
        raise EffectError(f"effect makes program order cyclic at {cyc[0]}")
    for tid in {e.tid for e in body}:
        chain = [e.label for e in events if e.tid == tid]
        for i, a in enumerate(chain):
            for b in chain[i + 1 :]:
                if (a, b) not in po and (b, a) not in po:
                    raise EffectError(
                        f"effect leaves {a} and {b} unordered on thread {tid}"
                    )

    ordered = _sort_events(events, po)
    po = Relation.from_pairs([e.label for e in ordered], po.pairs())
    return PreTrace(tuple(ordered), po, p.choices)


def _sort_events(events, po) -> list:
    def sort_key(e):
        group = 0 if e.tid == INIT_TID else (2 if e.tid == FINAL_TID else 1)
        before = sum(
            1 for o in events if o.tid == e.tid and (o.label, e.label) in po
        )
        return (group, e.tid, before, label_key(e.label))

    return sorted(events, key=sort_key)


# ---------------------------------------------------------------------------
# Deriving effects
# ---------------------------------------------------------------------------


def diff_effect(p: PreTrace, q: PreTrace) -> TransformationEffect:
    """Effect turning p into q, matching events by label."""
    common = set(p.by_label) & set(q.by_label)
    remap = {}
    for lab in sorted(common, key=label_key):
        a, b = p.by_label[lab], q.by_label[lab]
        if (a.kind, a.loc, a.value, a.dest) != (b.kind, b.loc, b.value, b.dest):
            raise EffectError(
                f"label {lab} names different events in the two pre-traces"
            )
        if a.tid != b.tid:
            if remap.get(a.tid, b.tid) != b.tid:
                raise EffectError(
                    f"thread renumbering is not a function: thread {a.tid} "
                    f"maps to both {remap[a.tid]} and {b.tid}"
                )
            remap[a.tid] = b.tid
    for lab in sorted(common, key=label_key):
        a, b = p.by_label[lab], q.by_label[lab]
        if remap.get(a.tid, a.tid) != b.tid:
            raise EffectError(
                f"thread renumbering is not a function: {lab} keeps thread "
                f"{a.tid} but other events move it to {remap[a.tid]}"
            )
    st_minus = frozenset(e for e in p.events if e.label not in common)
    st_plus = frozenset(e for e in q.events if e.label not in common)
    red_p = p.po.transitive_reduction()
    red_q = q.po.transitive_reduction()
    po_minus = frozenset(
        (a, b)
        for a, b in red_p.pairs()
        if not (a in q.by_label and b in q.by_label and (a, b) in q.po)
    )
    po_plus = frozenset(
        (a, b)
        for a, b in red_q.pairs()
        if not (a in p.by_label and b in p.by_label and (a, b) in p.po)
    )
    return TransformationEffect(
        st_minus, st_plus, po_minus, po_plus, remap or None
    )


# ---------------------------------------------------------------------------
# Effect constructors
# ---------------------------------------------------------------------------


def _memory_between(p: PreTrace, a: str, b: str) -> list:
    return [
        e.label
        for e in p.memory_events()
        if (a, e.label) in p.po and (e.label, b) in p.po
    ]


def make_effect(p: PreTrace, kind: str, *args) -> TransformationEffect:
    """reorder l1 l2 | reorder_rr l1 l2 | eliminate l |
    introduce event after before | inline tid_into tid_from"""
    if kind in ("reorder", "reorder_rr"):
        l1, l2 = args
        for lab in (l1, l2):
            if lab not in p.by_label:
                raise EffectError(f"no event labeled {lab}")
        e1, e2 = p.by_label[l1], p.by_label[l2]
        if e1.tid != e2.tid:
            raise EffectError("reordering crosses threads")
        if (l1, l2) not in p.po:
            raise EffectError(f"{l1} is not ordered before {l2}")
        between = _memory_between(p, l1, l2)
        if between:
            raise EffectError(
                f"{l1} and {l2} are not adjacent; {between[0]} lies between them"
            )
        red = p.po.transitive_reduction()
        if (l1, l2) not in red:
            raise EffectError(f"{l1} and {l2} are not adjacent in program order")
        if kind == "reorder_rr":
            if e1.kind != "R" or e2.kind != "R":
                raise EffectError("reorder_rr needs two plain reads")
            if e1.tid == FINAL_TID:
                raise EffectError("final-state reads cannot be reordered")
            if e1.loc == e2.loc:
                raise EffectError(
                    f"reorder_rr needs distinct locations, both read {e1.loc}"
                )
        # swapping the pair relinks its same-thread neighbors, or the
        # events on either side would fall unordered
        po_minus = {(l1, l2)}
        po_plus = {(l2, l1)}
        for x, y in red.pairs():
            if y == l1 and x != l2 and p.by_label[x].tid == e1.tid:
                po_minus.add((x, l1))
                po_plus.add((x, l2))
            if x == l2 and y != l1 and p.by_label[y].tid == e1.tid:
                po_minus.add((l2, y))
                po_plus.add((l1, y))
        return TransformationEffect(po_minus=po_minus, po_plus=po_plus)
    if kind == "eliminate":
        (lab,) = args
        if lab not in p.by_label:
            raise EffectError(f"no event labeled {lab}")
        ev = p.by_label[lab]
        red = p.po.transitive_reduction()
        incident = {(a, b) for a, b in red.pairs() if lab in (a, b)}
        return TransformationEffect(st_minus={ev}, po_minus=incident)
    if kind == "introduce":
        ev, after, before = args
        if ev.label in p.by_label:
            raise EffectError(f"label {ev.label} already exists")
        po_plus = set()
        if after is not None:
            if after not in p.by_label:
                raise EffectError(f"no event labeled {after}")
            po_plus.add((after, ev.label))
        if before is not None:
            if before not in p.by_label:
                raise EffectError(f"no event labeled {before}")
            po_plus.add((ev.label, before))
        return TransformationEffect(st_plus={ev}, po_plus=po_plus)
    if kind == "inline":
        t_into, t_from = args
        tids = {e.tid for e in p.events}
        if t_into not in tids or t_from not in tids or t_into == t_from:
            raise EffectError(
                f"inline needs two distinct existing threads, got {t_into}, {t_from}"
            )
        into_events = [e.label for e in p.events if e.tid == t_into]
        from_events = [e.label for e in p.events if e.tid == t_from]
        po_plus = {(a, b) for a in into_events for b in from_events}
        return TransformationEffect(po_plus=po_plus, tid_remap={t_from: t_into})
    raise EffectError(f"unknown effect kind {kind!r}")


# ---------------------------------------------------------------------------
# Safety
# ---------------------------------------------------------------------------


@dataclass
class SafetyReport:
    safe: bool
    checked_pairs: int = 0
    witness: Optional[object] = None  # consistent transformed execution
    witness_partners: tuple = ()  # comparable source executions (inconsistent)
    note: str = ""

    def render(self) -> str:
        if self.safe:
            return f"safe ({self.checked_pairs} execution pairs checked)"
        lines = [f"unsafe: {self.note}"]
        if self.witness is not None:
            out = outcome_of(self.witness)
            lines.append(f"  transformed execution outcome: {out.render()}")
            lines.append(f"  rf: {sorted(self.witness.rf.items())}")
        return "\n".join(lines)


def _event_signature(p: PreTrace) -> frozenset:
    return frozenset((e.label, e.kind, e.loc, e.value) for e in p.events)


def check_no_new_writes(p: PreTrace, q: PreTrace, limit=None) -> bool:
    """Candidate-level containment of the transformed pre-trace in the
    source, ignoring any model."""
    # dropping events never adds behavior: surviving reads keep their
    # write choices and mo extends linearly, provided every source read
    # has a write to draw from at all
    if _event_signature(q) <= _event_signature(p):
        write_locs = {e.loc for e in p.events if e.is_write}
        if all(e.loc in write_locs for e in p.events if e.is_read):
            return True
    kwargs = {} if limit is None else {"limit": limit}
    q_cands = list(enumerate_candidates(q, **kwargs))
    p_cands = list(enumerate_candidates(p, **kwargs))
    return all(
        any(executions_comparable(c, d) for d in p_cands) for c in q_cands
    )


def _uncontained(m: MemoryModel, p: PreTrace, q: PreTrace, limit=None):
    """Yield (transformed candidate, comparable source candidates) for
    every consistent candidate of q with no comparable consistent
    candidate of p.  Also counts work in the final attribute."""
    kwargs = {} if limit is None else {"limit": limit}
    if _event_signature(p) == _event_signature(q):
        # order-only effects keep the read and write population, so
        # the one comparable source candidate reuses rf and mo as-is
        p_universe = p.labels()
        for c in enumerate_candidates(q, **kwargs):
            if not is_consistent(m, c):
                continue
            mirror = Execution(
                p, c.rf, Relation.from_pairs(p_universe, c.mo.pairs())
            )
            if not is_consistent(m, mirror):
                yield c, (mirror,)
        return
    p_cands = list(enumerate_candidates(p, **kwargs))
    p_consistency = {}

    def p_consistent(i):
        if i not in p_consistency:
            p_consistency[i] = is_consistent(m, p_cands[i])
        return p_consistency[i]

    for c in enumerate_candidates(q, **kwargs):
        if not is_consistent(m, c):
            continue
        partners = [
            i for i, d in enumerate(p_cands) if executions_comparable(c, d)
        ]
        if not any(p_consistent(i) for i in partners):
            yield c, tuple(p_cands[i] for i in partners)


def _guard_containment(p, q, limit, force):
    if not check_no_new_writes(p, q, limit):
        warnings.warn(
            "transformed pre-trace has candidate executions with no "
            "comparable source execution; its behaviors are not contained"
        )
        if not force:
            raise EffectError(
                "effect introduces uncontained candidate behaviors; "
                "pass force=True to evaluate safety anyway"
            )


def unsafe_executions(
    m: MemoryModel,
    p: PreTrace,
    tr: TransformationEffect,
    limit=None,
    force: bool = False,
):
    """All unsafety witnesses of tr on p under m, as (transformed
    execution, comparable source executions) pairs."""
    q = apply_effect(p, tr)
    _guard_containment(p, q, limit, force)
    yield from _uncontained(m, p, q, limit)


def effect_safe(
    m: MemoryModel,
    p: PreTrace,
    tr: TransformationEffect,
    limit=None,
    force: bool = False,
) -> SafetyReport:
    """Decide whether tr is safe on p under m: every consistent
    candidate of the transformed pre-trace needs a comparable
    consistent candidate of p."""
    q = apply_effect(p, tr)
    _guard_containment(p, q, limit, force)
    kwargs = {} if limit is None else {"limit": limit}
    checked = len(list(enumerate_candidates(q, **kwargs)))
    for c, partners in _uncontained(m, p, q, limit):
        note = (
            "no comparable execution of the source pre-trace"
            if not partners
            else "every comparable source execution is inconsistent"
        )
        return SafetyReport(
            False, checked, witness=c, witness_partners=partners, note=note
        )
    return SafetyReport(True, checked)


def transformation_safe(
    m: MemoryModel,
    source_pretraces,
    transformed_pretraces,
    limit=None,
    semantic_guards: bool = False,
    force: bool = False,
) -> SafetyReport:
    """Whole-program safety: every pre-trace of the transformed program
    needs a comparable source pre-trace, and each comparable pair must
    be effect-safe under m."""
    checked = 0
    for q in transformed_pretraces:
        partners = [
            p
            for p in source_pretraces
            if pretraces_comparable(p, q, semantic_guards)
        ]
        if not partners:
            return SafetyReport(
                False,
                checked,
                note=(
                    "transformed pre-trace with choices "
                    f"[{q.describe()}] has no comparable source pre-trace"
                ),
            )
        for p in partners:
            tr = diff_effect(p, q)
            report = effect_safe(m, p, tr, limit, force)
            checked += report.checked_pairs
            if not report.safe:
                report.checked_pairs = checked
                report.note = (
                    f"pair (source [{p.describe()}], transformed "
                    f"[{q.describe()}]): {report.note}"
                )
                return report
    return SafetyReport(True, checked)
