"""Pre-trace enumeration: branch choices, program order, final reads.

A pre-trace fixes, per thread, which branch arms were taken, and holds
the resulting memory events under a closed program order.  Branch
filtering prunes choices that the thread-local sequential semantics
cannot realize: constant guards take their one arm, and repeated guards
on an untouched local repeat their earlier choice.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .litmus import (
    INIT_TID,
    FINAL_TID,
    AbstractProgram,
    Event,
    Guard,
    LitmusError,
    SFence,
    SIf,
    SLocal,
    SRead,
    SRmw,
    SWrite,
    final_read_event,
)
from .relalg import Relation, label_key

UNKNOWN = object()  # local value after a shared read


@dataclass(frozen=True)
class BranchChoice:
    branch_id: str
    guard: Guard
    taken: bool  # True = then arm
    resolved: Optional[bool] = None  # constant truth value, when the
    # filter could decide the guard

    def key(self):
        return label_key(self.branch_id)


@dataclass
class PreTrace:
    """Events of one control-flow resolution plus closed po."""

    events: tuple
    po: Relation  # transitively closed, over event labels
    choices: tuple = ()

    def __post_init__(self):
        self.by_label = {e.label: e for e in self.events}

    def labels(self):
        return tuple(e.label for e in self.events)

    def event(self, label: str) -> Event:
        return self.by_label[label]

    def choice_map(self) -> dict:
        return {c.branch_id: c.taken for c in self.choices}

    def memory_events(self):
        return tuple(e for e in self.events if e.kind in ("R", "W", "U"))

    def final_reads(self):
        return tuple(e for e in self.events if e.tid == FINAL_TID)

    def po_display(self) -> Relation:
        return self.po.transitive_reduction()

    def describe(self) -> str:
        picks = ", ".join(
            f"{c.branch_id}={'then' if c.taken else 'else'}" for c in self.choices
        )
        return picks or "straight-line"


def _closed_po(init_events, thread_events, finals) -> Relation:
    """Program order: per-thread chains, init writes before everything,
    final reads after everything."""
    body = [e for _, evs in sorted(thread_events.items()) for e in evs]
    universe = [e.label for e in init_events] + [e.label for e in body]
    universe += [e.label for e in finals]
    pairs = []
    for a, b in itertools.pairwise(init_events):
        pairs.append((a.label, b.label))
    for i in init_events:
        pairs.extend((i.label, e.label) for e in body)
    for _, evs in sorted(thread_events.items()):
        pairs.extend(
            (a.label, b.label) for a, b in itertools.pairwise(evs)
        )
    for f in finals:
        pairs.extend((e.label, f.label) for e in init_events)
        pairs.extend((e.label, f.label) for e in body)
    for a, b in itertools.pairwise(finals):
        pairs.append((a.label, b.label))
    return Relation.from_pairs(universe, pairs).closure()


def _guard_truth(guard: Guard, env: dict):
    """Constant truth value of a guard under known locals, else None."""
    if guard.op == "true":
        return True
    if guard.op == "false":
        return False
    val = env.get(guard.local, 0)  # locals default to 0
    if val is UNKNOWN:
        return None
    return (val == guard.value) == (guard.op == "eq")


def _guard_key(guard: Guard):
    return (guard.local, guard.op, guard.value)


def _thread_paths(stmts, prog, filtered: bool):
    """All control-flow resolutions of one thread.

    Yields (events, choices) pairs.  env maps locals to known constants;
    forced pins repeated guards to their earlier choice (filter rule ii).
    """

    def walk(rest, env, forced, events, choices):
        if not rest:
            yield tuple(events), tuple(choices)
            return
        st, tail = rest[0], rest[1:]
        if isinstance(st, SIf):
            truth = _guard_truth(st.guard, env) if filtered else None
            gkey = _guard_key(st.guard)
            if truth is not None:
                arm = st.then_body if truth else st.else_body
                choices.append(BranchChoice(st.branch_id, st.guard, truth, truth))
                yield from walk(list(arm) + tail, env, forced, events, choices)
                choices.pop()
                return
            if filtered and gkey in forced:
                taken = forced[gkey]
                arm = st.then_body if taken else st.else_body
                choices.append(BranchChoice(st.branch_id, st.guard, taken))
                yield from walk(list(arm) + tail, env, forced, events, choices)
                choices.pop()
                return
            for taken in (True, False):
                arm = st.then_body if taken else st.else_body
                choices.append(BranchChoice(st.branch_id, st.guard, taken))
                sub_forced = dict(forced)
                if filtered:
                    sub_forced[gkey] = taken
                yield from walk(list(arm) + tail, dict(env), sub_forced, events, choices)
                choices.pop()
            return
        if isinstance(st, SLocal):
            env = dict(env)
            if isinstance(st.src, int):
                env[st.dest] = st.src
            else:
                env[st.dest] = env.get(st.src, 0)
            forced = {k: v for k, v in forced.items() if k[0] != st.dest}
            yield from walk(tail, env, forced, events, choices)
            return
        if isinstance(st, (SRead, SRmw)):
            env = dict(env)
            env[st.dest] = UNKNOWN
            forced = {k: v for k, v in forced.items() if k[0] != st.dest}
            events.append(prog.events[st.label])
            yield from walk(tail, env, forced, events, choices)
            events.pop()
            return
        if isinstance(st, (SWrite, SFence)):
            events.append(prog.events[st.label])
            yield from walk(tail, env, forced, events, choices)
            events.pop()
            return
        raise LitmusError(f"unhandled statement {st!r}")

    yield from walk(list(stmts), {}, {}, [], [])


def enumerate_pretraces(prog: AbstractProgram, filtered: bool = True) -> list:
    """All pre-traces of the program, one per surviving choice vector.

    Deterministic order: sorted by choice vector, then-arm first.
    """
    per_thread = [
        list(_thread_paths(prog.threads[tid], prog, filtered))
        for tid in sorted(prog.threads)
    ]
    out = []
    for combo in itertools.product(*per_thread):
        thread_events = {}
        choices = []
        for tid, (events, chs) in zip(sorted(prog.threads), combo):
            thread_events[tid] = events
            choices.extend(chs)
        choices.sort(key=lambda c: c.key())
        po = _closed_po(prog.init_events, thread_events, [])
        events = tuple(prog.init_events) + tuple(
            e for _, evs in sorted(thread_events.items()) for e in evs
        )
        out.append(PreTrace(events, po, tuple(choices)))
    out.sort(key=lambda p: tuple((c.key(), not c.taken) for c in p.choices))
    return out


def attach_final_reads(p: PreTrace, locs) -> PreTrace:
    """Append one read per location, po-after everything, in the given
    order.  The pre-trace must declare the location (have an init write
    for it)."""
    locs = list(locs)
    if not locs:
        return p
    declared = {e.loc for e in p.events if e.tid == INIT_TID and e.kind == "W"}
    finals = []
    for loc in locs:
        if loc not in declared:
            raise LitmusError(f"final read of undeclared location {loc!r}")
        finals.append(final_read_event(loc))
    init_events = [e for e in p.events if e.tid == INIT_TID]
    thread_events = {}
    for e in p.events:
        if e.tid not in (INIT_TID, FINAL_TID):
            thread_events.setdefault(e.tid, []).append(e)
    po = _closed_po(init_events, thread_events, finals)
    return PreTrace(tuple(p.events) + tuple(finals), po, p.choices)


def pretraces_of(prog: AbstractProgram, filtered: bool = True, with_finals: bool = True):
    """Pre-traces with the program's final reads attached."""
    out = enumerate_pretraces(prog, filtered)
    if with_finals and prog.final_locs:
        out = [attach_final_reads(p, prog.final_locs) for p in out]
    return out


def _guards_equal(c1: BranchChoice, c2: BranchChoice, semantic: bool) -> bool:
    if _guard_key(c1.guard) == _guard_key(c2.guard):
        return True
    if semantic and c1.resolved is not None and c2.resolved is not None:
        return True
    return False


def pretraces_comparable(
    p: PreTrace, q: PreTrace, semantic_guards: bool = False
) -> bool:
    """True when every branch point present in both, under the same
    guard, took the same arm.  With semantic_guards, guards that the
    filter resolved to constants also count as matching."""
    pm = {c.branch_id: c for c in p.choices}
    for c2 in q.choices:
        c1 = pm.get(c2.branch_id)
        if c1 is None:
            continue
        if _guards_equal(c1, c2, semantic_guards) and c1.taken != c2.taken:
            return False
    return True
