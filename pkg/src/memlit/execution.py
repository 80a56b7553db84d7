"""Candidate executions: rf and mo enumeration over a pre-trace.

An execution augments a pre-trace with a read-from map and a memory
order.  Candidates are the well-formed ones: every read sourced from a
same-location write, mo a strict total order over all writes.  No
consistency checking happens here; models.py applies the axioms.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable

from .litmus import FINAL_TID, Event
from .pretrace import PreTrace
from .relalg import EvalEnv, Relation, is_strict_total_order, label_key

DEFAULT_LIMIT = 10**6


class ExplosionError(Exception):
    def __init__(self, count, limit):
        super().__init__(
            f"{count} rf/mo combinations exceed the enumeration limit of {limit}"
        )
        self.count = count
        self.limit = limit


@dataclass(frozen=True)
class Execution:
    """rf maps read label -> source write label (one source per read,
    so rf inverse is functional by construction); mo is a strict order
    over write labels."""

    pretrace: PreTrace
    rf: dict
    mo: Relation

    def __post_init__(self):
        object.__setattr__(self, "rf", dict(self.rf))

    def reads(self):
        return tuple(e for e in self.pretrace.events if e.is_read)

    def writes(self):
        return tuple(e for e in self.pretrace.events if e.is_write)

    def event(self, label: str) -> Event:
        return self.pretrace.event(label)

    def rf_pairs(self):
        return frozenset((w, r) for r, w in self.rf.items())

    def key(self):
        return (
            tuple(sorted(self.rf.items())),
            tuple(sorted(self.mo.pairs())),
        )

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return (
            isinstance(other, Execution)
            and self.pretrace.labels() == other.pretrace.labels()
            and self.key() == other.key()
        )


def candidate_count(p: PreTrace) -> int:
    """Number of rf/mo combinations before any consistency check."""
    writes = [e for e in p.events if e.is_write]
    total = math.factorial(len(writes))
    for r in p.events:
        if not r.is_read:
            continue
        total *= sum(1 for w in writes if w.loc == r.loc)
    return total


def _mo_from_order(universe, index, order) -> Relation:
    rows = [0] * len(universe)
    later = 0
    for w in reversed(order):
        i = index[w]
        rows[i] = later
        later |= 1 << i
    return Relation(tuple(universe), tuple(rows))


def enumerate_candidates(
    p: PreTrace, limit: int = DEFAULT_LIMIT
) -> Iterable[Execution]:
    """Yield every candidate execution of p in canonical order: rf
    choices vary first (per read, sources in label order), then mo
    permutations (lexicographic over write labels)."""
    count = candidate_count(p)
    if count > limit:
        raise ExplosionError(count, limit)
    writes = sorted((e for e in p.events if e.is_write), key=lambda e: label_key(e.label))
    reads = sorted((e for e in p.events if e.is_read), key=lambda e: label_key(e.label))
    sources = []
    for r in reads:
        srcs = [w.label for w in writes if w.loc == r.loc]
        if not srcs:
            warnings.warn(
                f"read {r.label} of {r.loc} has no write to read from; "
                "no candidate executions exist"
            )
            return
        sources.append(srcs)
    universe = p.labels()
    index = {lab: i for i, lab in enumerate(universe)}
    write_labels = [w.label for w in writes]
    for choice in itertools.product(*sources):
        rf = {r.label: w for r, w in zip(reads, choice)}
        for order in itertools.permutations(write_labels):
            yield Execution(p, rf, _mo_from_order(universe, index, order))


def derived_relations(e: Execution) -> EvalEnv:
    """Relation environment for rule evaluation: po, rf, rfi, rfe, mo,
    mo_loc, rb = rf inverse ; mo_loc, and the event-class sets."""
    p = e.pretrace
    universe = p.labels()
    loc = {ev.label: ev.loc for ev in p.events}
    tid = {ev.label: ev.tid for ev in p.events}
    rf_rel = Relation.from_pairs(universe, [(w, r) for r, w in e.rf.items()])
    rfi = Relation.from_pairs(
        universe, [(w, r) for r, w in e.rf.items() if tid[w] == tid[r]]
    )
    rfe = Relation.from_pairs(
        universe, [(w, r) for r, w in e.rf.items() if tid[w] != tid[r]]
    )
    mo_loc = Relation.from_pairs(
        universe, [(a, b) for a, b in e.mo.pairs() if loc[a] == loc[b]]
    )
    rb = rf_rel.inverse().compose(mo_loc)
    reads = frozenset(ev.label for ev in p.events if ev.is_read)
    writes = frozenset(ev.label for ev in p.events if ev.is_write)
    rmws = frozenset(ev.label for ev in p.events if ev.kind == "U")
    fences = frozenset(ev.label for ev in p.events if ev.kind == "F")
    finals = frozenset(ev.label for ev in p.events if ev.tid == FINAL_TID)
    plain = frozenset(ev.label for ev in p.events if ev.kind == "R" and ev.tid != FINAL_TID)
    return EvalEnv(
        relations={
            "po": p.po,
            "rf": rf_rel,
            "rfi": rfi,
            "rfe": rfe,
            "mo": e.mo,
            "mo_loc": mo_loc,
            "rb": rb,
        },
        universe=universe,
        loc=loc,
        reads=reads,
        writes=writes,
        rmws=rmws,
        fences_rr=fences,
        plain_reads=plain,
        final_reads=finals,
    )


def is_candidate(e: Execution) -> bool:
    """Well-formedness: total rf over reads, same-location sources,
    mo a strict total order over all writes."""
    p = e.pretrace
    by_label = p.by_label
    reads = [ev for ev in p.events if ev.is_read]
    writes = [ev.label for ev in p.events if ev.is_write]
    for r in reads:
        src = e.rf.get(r.label)
        if src is None or src not in by_label:
            return False
        w = by_label[src]
        if not w.is_write or w.loc != r.loc:
            return False
    if set(e.rf) - {r.label for r in reads}:
        return False
    if not is_strict_total_order(e.mo.restrict(writes), writes):
        return False
    # max(loc) nonempty for every written location: automatic when mo
    # is total and some write exists, asserted for raw executions
    for loc in {by_label[w].loc for w in writes}:
        group = [w for w in writes if by_label[w].loc == loc]
        if not any(
            all(g == w or (w, g) in e.mo for g in group) for w in group
        ):
            return False
    return True


def executions_comparable(e1: Execution, e2: Execution) -> bool:
    """Common reads agree on their rf source; mo pairs over common
    writes agree, checked in both directions."""
    r1 = {ev.label for ev in e1.reads()}
    r2 = {ev.label for ev in e2.reads()}
    for r in r1 & r2:
        if e1.rf.get(r) != e2.rf.get(r):
            return False
    w1 = {ev.label for ev in e1.writes()}
    w2 = {ev.label for ev in e2.writes()}
    common = w1 & w2
    for a, b in e1.mo.pairs():
        if a in common and b in common and (a, b) not in e2.mo:
            return False
    for a, b in e2.mo.pairs():
        if a in common and b in common and (a, b) not in e1.mo:
            return False
    return True


def set_contained(a, b) -> bool:
    """Every execution in a has a comparable partner in b."""
    return all(any(executions_comparable(x, y) for y in b) for x in a)


# Outcomes -------------------------------------------------------------------


@dataclass(frozen=True)
class Outcome:
    rf: frozenset
    mo: frozenset
    locals: dict
    finals: dict

    def render(self) -> str:
        parts = [f"{k}={v}" for k, v in sorted(self.locals.items())]
        parts += [f"{k}@final={v}" for k, v in sorted(self.finals.items())]
        return ", ".join(parts) if parts else "(empty)"


def outcome_of(e: Execution) -> Outcome:
    """Register and final-memory values.  Each read delivers the value
    of its rf source; a register keeps the value of its last assignment
    (thread order, then program order within the thread)."""
    locals_map = {}
    finals = {}
    for ev in e.pretrace.events:
        if not ev.is_read or ev.dest is None:
            continue
        src = e.rf.get(ev.label)
        if src is None:
            continue
        value = e.pretrace.event(src).value
        if ev.tid == FINAL_TID:
            finals[ev.loc] = value
        else:
            locals_map[ev.dest] = value
    return Outcome(e.rf_pairs(), frozenset(e.mo.pairs()), locals_map, finals)


def eval_predicate(outcome: Outcome, predicate) -> bool:
    """Conjunction of the predicate's atoms over an outcome.  Missing
    bindings evaluate to 0 with a warning."""
    if predicate is None:
        return True
    ok = True
    for atom in predicate.atoms:
        if atom.kind == "final":
            if atom.name not in outcome.finals:
                warnings.warn(
                    f"{atom.name}@final is unbound in this outcome; using 0"
                )
            got = outcome.finals.get(atom.name, 0)
        else:
            if atom.name not in outcome.locals:
                warnings.warn(
                    f"local {atom.name} is never assigned by a read on this "
                    "trace; using 0"
                )
            got = outcome.locals.get(atom.name, 0)
        ok = ok and got == atom.value
    return ok


# Raw executions -------------------------------------------------------------


def execution_from_raw(data: dict) -> Execution:
    """Build an execution from plain data: events as dicts, po / mo as
    pair lists, rf as read -> write map.  po is closed here; mo is
    taken as given."""
    events = []
    for d in data["events"]:
        events.append(
            Event(
                d["label"],
                d["tid"],
                d["kind"],
                d.get("loc"),
                d.get("value"),
                d.get("dest"),
            )
        )
    labels = [e.label for e in events]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate event labels in raw execution")
    po = Relation.from_pairs(labels, [tuple(p) for p in data.get("po", [])]).closure()
    if not po.is_irreflexive():
        raise ValueError("raw po has a cycle")
    mo = Relation.from_pairs(labels, [tuple(p) for p in data.get("mo", [])])
    rf = {str(r): str(w) for r, w in dict(data.get("rf", {})).items()}
    by_label = {e.label: e for e in events}
    for r, w in rf.items():
        if r not in by_label or w not in by_label:
            raise ValueError(f"rf pair ({w}, {r}) names unknown events")
        if not by_label[w].is_write or not by_label[r].is_read:
            raise ValueError(f"rf pair ({w}, {r}) must be write -> read")
        if by_label[w].loc != by_label[r].loc:
            raise ValueError(f"rf pair ({w}, {r}) crosses locations")
    choices = tuple()
    return Execution(PreTrace(tuple(events), po, choices), rf, mo)
