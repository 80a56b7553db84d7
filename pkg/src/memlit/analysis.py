"""Repair and meta-level analysis over executions and effects.

Crucial sets name the reads whose read-from edges hide behind an
inconsistency: delete their rf and the execution turns consistent.
Closed-form read diagnosis (cra_sc_closed_form) answers the same
single-read question for each sc rule without re-evaluating the rule
body.  piecewise_extend walks deleted rf edges back in, one read at a
time, keeping consistency.  Those pieces combine in unsafety_witness,
which builds a concrete transformed execution certifying an effect
unsafe.  The check_* searches decide the bounded meta-properties: rule
subsumption between models (check_weak), safety of every read-read
reordering over a bounded program family (check_sound_rr), existence of
an effect separating two models (complete_search), and pairwise
non-redundancy of a rule set (redundancy_witnesses).
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .execution import (
    Execution,
    ExplosionError,
    derived_relations,
    enumerate_candidates,
    executions_comparable,
    is_candidate,
    outcome_of,
)
from .litmus import FINAL_TID, INIT_TID, load_program
from .models import MemoryModel, is_consistent, violated_rule_names
from .pretrace import PreTrace, pretraces_of
from .relalg import (
    Compose,
    IdFilter,
    Opt,
    Relation,
    atom,
    eval_expr,
    eval_expr_marked,
    hb_expr,
    is_strict_total_order,
    label_key,
)
from .transform import (
    EffectError,
    TransformationEffect,
    apply_effect,
    effect_safe,
    make_effect,
)


class AnalysisError(Exception):
    pass


# ---------------------------------------------------------------------------
# Crucial sets
# ---------------------------------------------------------------------------

SUBSET_CAP = 128


@dataclass(frozen=True)
class CrucialSet:
    """Reads whose rf removal repairs the execution.  repaired keeps
    the pre-trace and mo, differs only by the deleted rf edges, and is
    consistent though usually no longer well-formed."""

    reads: frozenset
    repaired: Execution


def remove_rf(e: Execution, reads) -> Execution:
    reads = set(reads)
    missing = sorted(reads - set(e.rf), key=label_key)
    if missing:
        raise AnalysisError(f"no rf edge to remove for {missing[0]}")
    return Execution(
        e.pretrace, {r: w for r, w in e.rf.items() if r not in reads}, e.mo
    )


def crucial_sets(e: Execution, m: MemoryModel, cap: int = SUBSET_CAP) -> list:
    """All read subsets whose rf removal yields an m-consistent
    execution, searched in increasing size.  The execution must be
    inconsistent to begin with.  May return an empty list: some
    executions have no crucial set at all."""
    if is_consistent(m, e):
        raise AnalysisError(
            "execution is already consistent; no crucial set applies"
        )
    reads = sorted(e.rf, key=label_key)
    found = []
    considered = 0
    for size in range(1, len(reads) + 1):
        for combo in itertools.combinations(reads, size):
            if considered >= cap:
                warnings.warn(
                    f"crucial-set search truncated after {cap} read subsets"
                )
                return found
            considered += 1
            repaired = remove_rf(e, combo)
            if is_consistent(m, repaired):
                found.append(CrucialSet(frozenset(combo), repaired))
    return found


def minimal_crucial_sets(
    e: Execution, m: MemoryModel, cap: int = SUBSET_CAP
) -> list:
    """Crucial sets with no proper crucial subset.  Size-ascending
    search order makes the filter a single backward scan."""
    out = []
    for cs in crucial_sets(e, m, cap):
        if not any(prev.reads < cs.reads for prev in out):
            out.append(cs)
    return out


# ---------------------------------------------------------------------------
# Single-read repair diagnosis
# ---------------------------------------------------------------------------


def _rf_edge_marks(env, r: str, w: str) -> dict:
    """Marked sub-relations tracing one rf edge (w, r): the edge itself
    under every rf atom, plus the rb pairs it induces (rb sourced at r
    exists only through r's own rf)."""
    edge = Relation.from_pairs(env.universe, [(w, r)])
    marks = {"rf": edge}
    for split in ("rfe", "rfi"):
        marks[split] = edge.intersect(env.relation(split))
    marks["rb"] = env.relation("rb").restrict([r], env.universe)
    return marks


def cra_bruteforce(body, e: Execution) -> frozenset:
    """Reads whose rf edge can take part in a reflexivity witness of
    body, found by marked evaluation over the whole expression rather
    than the per-rule patterns.  body is a relation expression, or
    None for the mo-totality rule (which rf never enters).  An
    irreflexive body yields the empty set."""
    if body is None:
        return frozenset()
    env = derived_relations(e)
    if eval_expr(body, env).is_irreflexive():
        return frozenset()
    out = set()
    for r, w in e.rf.items():
        hit = eval_expr_marked(body, env, _rf_edge_marks(env, r, w))
        if hit.marked.reflexives():
            out.add(r)
    return frozenset(out)


def cra_sc_closed_form(rule: str, e: Execution) -> frozenset:
    """Pattern characterization of cra for each sc rule.  A read
    qualifies when it sits at the rf position of a cycle of the rule's
    violation shape, so no deletion-and-recheck is needed."""
    env = derived_relations(e)
    po = env.relation("po")
    mo = env.relation("mo")
    rb = env.relation("rb")
    rfe = env.relation("rfe")
    rfi = env.relation("rfi")
    hb = po.union(env.relation("rf")).closure()
    reads = env.reads

    def rf_into_cycle(prefix):
        # reads r with some x where (x, r) in prefix and (r, x) in hb
        return {r for r in hb.compose(prefix).reflexives() if r in reads}

    def own_cycle(rel):
        return {r for r in rel.reflexives() if r in reads}

    if rule == "a":
        return frozenset()
    if rule == "b":
        return frozenset(
            rf_into_cycle(rfe) | own_cycle(po.compose(rfi))
        )
    if rule == "c":
        return frozenset(
            rf_into_cycle(mo.compose(hb.optional()).compose(rfe))
        )
    if rule == "d":
        return frozenset(
            rf_into_cycle(rb.compose(hb.optional()).compose(rfe))
            | own_cycle(rb.compose(hb))
        )
    if rule == "e":
        return frozenset(
            rf_into_cycle(
                rb.compose(mo).compose(hb.optional()).compose(rfe)
            )
            | own_cycle(rb.compose(mo).compose(hb))
        )
    raise AnalysisError(f"no closed form for rule {rule!r}")


# ---------------------------------------------------------------------------
# Piecewise extension
# ---------------------------------------------------------------------------


def _mo_rank(e: Execution, writes) -> dict:
    order = sorted(
        writes,
        key=lambda w: (
            sum(1 for v in writes if (v, w) in e.mo),
            label_key(w),
        ),
    )
    return {w: i for i, w in enumerate(order)}


def piecewise_extend(
    e: Execution, m: MemoryModel, method: str = "auto"
) -> Optional[Execution]:
    """Complete the rf of a consistent, non-well-formed execution into
    an m-consistent candidate with the same mo, or report failure with
    None.  For sc the walk per read starts at the mo-maximal
    same-location write and moves to the immediate mo-previous write on
    a violation, except that a cycle of shape rb;mo?;hb through the
    read itself sends it to the immediate mo-later write instead.
    Other models search the write choices exhaustively.  method forces
    "guided" or "exhaustive"; "auto" picks the walk exactly for sc."""
    if method not in ("auto", "guided", "exhaustive"):
        raise AnalysisError(f"unknown extension method {method!r}")
    if not is_consistent(m, e):
        raise AnalysisError("only consistent executions can be extended")
    by_label = e.pretrace.by_label
    for r, w in e.rf.items():
        rd, wr = by_label.get(r), by_label.get(w)
        if (
            rd is None
            or wr is None
            or not rd.is_read
            or not wr.is_write
            or rd.loc != wr.loc
        ):
            raise AnalysisError(f"rf edge ({w}, {r}) is malformed")
    writes = [ev.label for ev in e.writes()]
    if writes and not is_strict_total_order(e.mo.restrict(writes), writes):
        raise AnalysisError("mo must be a strict total order over the writes")
    if is_candidate(e):
        return e
    missing = sorted(
        (ev for ev in e.reads() if ev.label not in e.rf),
        key=lambda ev: label_key(ev.label),
    )
    rank = _mo_rank(e, writes)
    pools = {}
    for ev in missing:
        pool = sorted(
            (w for w in writes if by_label[w].loc == ev.loc),
            key=rank.get,
        )
        if not pool:
            raise AnalysisError(
                f"read {ev.label} of {ev.loc} has no write to extend from"
            )
        pools[ev.label] = pool
    if method == "guided" and m.name != "sc":
        raise AnalysisError("the guided walk covers only the sc rule set")
    if method == "auto" and m.name == "sc":
        method = "guided"
    if method == "guided":
        return _guided_extension(e, m, missing, pools)
    return _exhaustive_extension(e, m, missing, pools)


_LATER_STEP = Compose((atom("rb"), Opt(atom("mo")), hb_expr()))


def _guided_extension(e, m, missing, pools):
    rf = dict(e.rf)
    for ev in missing:
        pool = pools[ev.label]
        idx = len(pool) - 1
        seen = set()
        chosen = None
        while 0 <= idx < len(pool) and pool[idx] not in seen:
            w = pool[idx]
            seen.add(w)
            trial = Execution(e.pretrace, {**rf, ev.label: w}, e.mo)
            if is_consistent(m, trial):
                chosen = w
                break
            env = derived_relations(trial)
            later = (ev.label, ev.label) in eval_expr(_LATER_STEP, env)
            idx += 1 if later else -1
        if chosen is None:
            return None
        rf[ev.label] = chosen
    return Execution(e.pretrace, rf, e.mo)


def _exhaustive_extension(e, m, missing, pools):
    labels = [ev.label for ev in missing]
    for combo in itertools.product(*(pools[lab] for lab in labels)):
        trial = Execution(
            e.pretrace, {**e.rf, **dict(zip(labels, combo))}, e.mo
        )
        if is_consistent(m, trial):
            return trial
    return None


# ---------------------------------------------------------------------------
# Constructive unsafety
# ---------------------------------------------------------------------------


def unsafety_witnesses(
    p: PreTrace, tr: TransformationEffect, m: MemoryModel, limit=None
):
    """Yield certified unsafety witnesses for tr on p: consistent
    candidates of the transformed pre-trace with no comparable
    consistent candidate of p, each built by deleting a minimal crucial
    set no comparable source execution shares and extending the repair
    back to a candidate.  Every yielded execution is re-verified
    directly, so the crucial-set reasoning only steers the search.
    Write-eliminating effects are rejected; the construction relies on
    mo carrying over unchanged."""
    if tr.removes_writes():
        raise AnalysisError(
            "write elimination is outside the crucial-set unsafety argument"
        )
    q = apply_effect(p, tr)
    kwargs = {} if limit is None else {"limit": limit}
    p_cands = list(enumerate_candidates(p, **kwargs))
    consistency = {}

    def consistent(i):
        if i not in consistency:
            consistency[i] = is_consistent(m, p_cands[i])
        return consistency[i]

    crucials = {}

    def partner_crucials(i):
        if i not in crucials:
            crucials[i] = minimal_crucial_sets(p_cands[i], m)
        return crucials[i]

    seen = set()
    for eq in enumerate_candidates(q, **kwargs):
        if is_consistent(m, eq):
            continue
        partner_idx = [
            i for i, d in enumerate(p_cands) if executions_comparable(eq, d)
        ]
        if not partner_idx or any(consistent(i) for i in partner_idx):
            continue
        for cr in minimal_crucial_sets(eq, m):
            if any(
                pc.reads <= cr.reads
                for i in partner_idx
                for pc in partner_crucials(i)
            ):
                continue
            ext = piecewise_extend(cr.repaired, m)
            if ext is None or not is_candidate(ext):
                continue
            if not is_consistent(m, ext):
                continue
            partners = [
                d for d in p_cands if executions_comparable(ext, d)
            ]
            if any(is_consistent(m, d) for d in partners):
                continue
            if ext.key() not in seen:
                seen.add(ext.key())
                yield ext
            break


def unsafety_witness(
    p: PreTrace, tr: TransformationEffect, m: MemoryModel, limit=None
) -> Optional[Execution]:
    for w in unsafety_witnesses(p, tr, m, limit):
        return w
    return None


# ---------------------------------------------------------------------------
# Cycle shapes
# ---------------------------------------------------------------------------


def _shape_table():
    po = atom("po")
    mo = atom("mo")
    rb = atom("rb")
    rfe = atom("rfe")
    rfi = atom("rfi")
    rf = atom("rf")
    return {
        "rfi;po": Compose((rfi, po)),
        "mo;po": Compose((mo, po)),
        "mo;rfe;po": Compose((mo, rfe, po)),
        "rb;mo?;po": Compose((rb, Opt(mo), po)),
        "rb;rfe;po": Compose((rb, rfe, po)),
        "mo;rf": Compose((mo, rf)),
        "rb;mo": Compose((rb, mo)),
        "rb;mo;rfe;po;[frr];po": Compose(
            (rb, mo, rfe, po, IdFilter("frr"), po)
        ),
    }


SHAPES = _shape_table()

# shapes a comparable source execution must show when only the
# read-read rules separate the models
COMPARABILITY_SHAPES = frozenset(
    ("rfi;po", "mo;po", "mo;rfe;po", "rb;mo?;po", "rb;rfe;po")
)
# additional shapes once rmw and fence rules join the rule set
EXTENSION_SHAPES = frozenset(("mo;rf", "rb;mo", "rb;mo;rfe;po;[frr];po"))


def classify_cycle_shapes(e: Execution) -> frozenset:
    """Tags of every shape whose composition has a cycle in e."""
    env = derived_relations(e)
    return frozenset(
        tag
        for tag, expr in SHAPES.items()
        if not eval_expr(expr, env).is_irreflexive()
    )


def read_write_deorder_reads(e: Execution) -> frozenset:
    """Reads sitting at the rf target of an rfi;po or mo;rfe;po cycle.
    Such a cycle in a comparable source execution forces the effect to
    have removed program order from a read to a write."""
    env = derived_relations(e)
    po = env.relation("po")
    hits = set(po.compose(env.relation("rfi")).reflexives())
    hits |= set(
        po.compose(env.relation("mo")).compose(env.relation("rfe")).reflexives()
    )
    return frozenset(h for h in hits if h in env.reads)


@dataclass
class ShapeObligation:
    """One (transformed, source) execution pair under the shape
    argument: the source must carry an allowed cycle shape, and a
    deordering cycle through a common read obliges the effect to drop a
    read-to-write order edge."""

    transformed: Execution
    source: Execution
    shapes: frozenset
    covered: bool
    deorder_reads: frozenset
    deorder_satisfied: bool


def shape_obligations(
    p: PreTrace,
    tr: TransformationEffect,
    weak: MemoryModel,
    base: MemoryModel,
    limit=None,
) -> list:
    """Instances of the cycle-shape containment argument for one
    effect.  Pairs qualify when the transformed candidate is
    weak-consistent yet base-inconsistent and every comparable source
    candidate is weak-inconsistent; each such source execution is then
    classified.  Callers assert covered and deorder_satisfied over the
    result."""
    q = apply_effect(p, tr)
    kwargs = {} if limit is None else {"limit": limit}
    allowed = set(COMPARABILITY_SHAPES)
    if weak.name == "sc_rr_ext":
        allowed |= EXTENSION_SHAPES
    common_reads = {ev.label for ev in p.events if ev.is_read} & {
        ev.label for ev in q.events if ev.is_read
    }
    rw_removed = any(
        a in p.by_label
        and b in p.by_label
        and p.by_label[a].is_read
        and p.by_label[b].is_write
        for a, b in tr.po_minus
    )
    p_cands = list(enumerate_candidates(p, **kwargs))
    records = []
    for eq in enumerate_candidates(q, **kwargs):
        if not is_consistent(weak, eq) or is_consistent(base, eq):
            continue
        partners = [
            d for d in p_cands if executions_comparable(eq, d)
        ]
        if not partners or any(is_consistent(weak, d) for d in partners):
            continue
        for d in partners:
            shapes = classify_cycle_shapes(d)
            deorder = read_write_deorder_reads(d) & common_reads
            records.append(
                ShapeObligation(
                    eq,
                    d,
                    shapes,
                    bool(shapes & allowed),
                    deorder,
                    (not deorder) or rw_removed,
                )
            )
    return records


# ---------------------------------------------------------------------------
# Read-diagnosis non-containment checks
# ---------------------------------------------------------------------------


def arr_cycle_pairs(e: Execution) -> list:
    """Ordered (rx, ry) plain-read pairs instantiating a cyclic
    rb;mo?;hb?;rfe;[rx];hb;[ry] composition with distinct locations."""
    env = derived_relations(e)
    hb = env.relation("po").union(env.relation("rf")).closure()
    prefix = (
        env.relation("rb")
        .compose(env.relation("mo").optional())
        .compose(hb.optional())
        .compose(env.relation("rfe"))
    )
    out = []
    for ry in sorted(env.plain_reads, key=label_key):
        for rx in sorted(env.plain_reads, key=label_key):
            if env.loc.get(rx) == env.loc.get(ry):
                continue
            if (ry, rx) in prefix and (rx, ry) in hb:
                out.append((rx, ry))
    return out


def _pair_noncontainment_targets(e: Execution, rx: str, ry: str) -> dict:
    env = derived_relations(e)
    po = atom("po")
    mo = atom("mo")
    rb = atom("rb")
    rfe = atom("rfe")
    rfi = atom("rfi")
    rf = atom("rf")
    fx = IdFilter(frozenset({rx}))
    fy = IdFilter(frozenset({ry}))
    same_x = IdFilter(
        frozenset(r for r in env.reads if env.loc.get(r) == env.loc.get(rx))
    )
    same_y = IdFilter(
        frozenset(r for r in env.reads if env.loc.get(r) == env.loc.get(ry))
    )
    return {
        "rb;mo?;po;[rx]": Compose((rb, Opt(mo), po, fx)),
        "rb;mo?;po;[ry]": Compose((rb, Opt(mo), po, fy)),
        "rb;rfe;[r'x];po;[rx]": Compose((rb, rfe, same_x, po, fx)),
        "rb;rfe;[r'y];po;[ry]": Compose((rb, rfe, same_y, po, fy)),
        "mo;rfe;[rx];po": Compose((mo, rfe, fx, po)),
        "mo;rfe;[ry];po": Compose((mo, rfe, fy, po)),
        "rfi;[rx];po": Compose((rfi, fx, po)),
        "rfi;[ry];po": Compose((rfi, fy, po)),
        "rb;mo": Compose((rb, mo)),
        "mo;rf": Compose((mo, rf)),
    }


def cra_noncontainment_violations(e: Execution) -> list:
    """Check, per instantiated read-read cycle, that the cycle's repair
    set is never contained in the repair set of the related cycle
    shapes.  Returns (rx, ry, target) triples where containment holds
    anyway; the meta-arguments treat these claims as hypotheses."""
    out = []
    for rx, ry in arr_cycle_pairs(e):
        body = Compose(
            (
                atom("rb"),
                Opt(atom("mo")),
                Opt(hb_expr()),
                atom("rfe"),
                IdFilter(frozenset({rx})),
                hb_expr(),
                IdFilter(frozenset({ry})),
            )
        )
        base = cra_bruteforce(body, e)
        for name, target in _pair_noncontainment_targets(e, rx, ry).items():
            if base <= cra_bruteforce(target, e):
                out.append((rx, ry, name))
    return out


# ---------------------------------------------------------------------------
# Meta-property searches
# ---------------------------------------------------------------------------


@dataclass
class MetaVerdict:
    property: str  # Weak | Sound | Complete | NonRedundant
    holds: bool
    counterexamples: list
    search_bound: str
    details: dict = field(default_factory=dict)

    def render(self) -> str:
        status = "holds" if self.holds else "fails"
        lines = [f"{self.property} {status}: {self.search_bound}"]
        shown = self.counterexamples[:20]
        for cx in shown:
            if isinstance(cx, dict):
                bits = [
                    f"{k}={v}"
                    for k, v in cx.items()
                    if isinstance(v, (str, int, tuple))
                ]
                lines.append("  counterexample: " + ", ".join(bits))
            else:
                lines.append(f"  counterexample: {cx}")
        rest = len(self.counterexamples) - len(shown)
        if rest > 0:
            lines.append(f"  ... and {rest} more")
        return "\n".join(lines)


def check_weak(
    w: MemoryModel, b: MemoryModel, corpus, stop_after=None
) -> MetaVerdict:
    """Does every b-consistent execution stay w-consistent?  corpus is
    an iterable of (name, execution)."""
    counterexamples = []
    checked = 0
    for name, e in corpus:
        checked += 1
        if is_consistent(b, e) and not is_consistent(w, e):
            counterexamples.append(
                {
                    "name": name,
                    "outcome": outcome_of(e).render(),
                    "execution": e,
                }
            )
            if stop_after and len(counterexamples) >= stop_after:
                break
    return MetaVerdict(
        "Weak",
        not counterexamples,
        counterexamples,
        f"every {b.name}-consistent execution {w.name}-consistent, "
        f"{checked} corpus executions",
    )


@dataclass(frozen=True)
class SoundBound:
    """Program family for the reordering sweep: straight-line loads
    and stores of the constant 1, counting the implicit initializing
    writes against the memory-event budget."""

    max_threads: int = 3
    max_memory_events: int = 6
    max_locations: int = 3


_SWEEP_LOCS = ("x", "y", "z")


def _compositions(n, max_parts):
    if n == 0:
        yield ()
        return
    if max_parts == 0:
        return
    for first in range(1, n + 1):
        for rest in _compositions(n - first, max_parts - 1):
            yield (first,) + rest


def canonical_program(threads: tuple, nloc: int) -> tuple:
    """Least encoding of a thread tuple under location renaming and
    thread reordering."""
    best = None
    for perm in itertools.permutations(range(nloc)):
        renamed = tuple(
            sorted(tuple((k, perm[l]) for k, l in th) for th in threads)
        )
        if best is None or renamed < best:
            best = renamed
    return best


def _bounded_reorder_programs(bound: SoundBound, canonicalize: bool):
    seen = set()
    for nloc in range(2, bound.max_locations + 1):
        budget = bound.max_memory_events - nloc
        alphabet = [
            (kind, l) for kind in ("R", "W") for l in range(nloc)
        ]
        for n in range(2, budget + 1):
            for comp in _compositions(n, bound.max_threads):
                for flat in itertools.product(alphabet, repeat=n):
                    threads = []
                    at = 0
                    for c in comp:
                        threads.append(tuple(flat[at : at + c]))
                        at += c
                    threads = tuple(threads)
                    used = {l for th in threads for _, l in th}
                    if used != set(range(nloc)):
                        continue
                    if not canonicalize:
                        yield threads
                        continue
                    canon = canonical_program(threads, nloc)
                    if canon not in seen:
                        seen.add(canon)
                        yield canon


def _adjacent_read_pairs(threads) -> list:
    pairs = []
    at = 0
    for th in threads:
        for i in range(len(th) - 1):
            (k1, l1), (k2, l2) = th[i], th[i + 1]
            if k1 == "R" and k2 == "R" and l1 != l2:
                pairs.append((f"A{at + i + 1}", f"A{at + i + 2}"))
        at += len(th)
    return pairs


def _sweep_program_text(threads) -> str:
    used = sorted({l for th in threads for _, l in th})
    inits = " ".join(f"{_SWEEP_LOCS[l]} = 0;" for l in used)
    lines = [f"init {{ {inits} }}"]
    regs = itertools.count(1)
    for tid, th in enumerate(threads, start=1):
        stmts = []
        for kind, l in th:
            loc = _SWEEP_LOCS[l]
            if kind == "W":
                stmts.append(f"{loc} = 1;")
            else:
                stmts.append(f"r{next(regs)} = {loc};")
        lines.append(f"thread {tid} {{ " + " ".join(stmts) + " }")
    return "\n".join(lines)


def check_sound_rr(
    m: MemoryModel,
    bound: Optional[SoundBound] = None,
    stop_after=None,
    canonicalize: bool = True,
) -> MetaVerdict:
    """Sweep every adjacent read-read reordering over the bounded
    program family and check each one safe under m.  Programs are
    deduplicated up to location renaming and thread order unless
    canonicalize is off (kept as an oracle for the deduplication)."""
    bound = bound or SoundBound()
    counterexamples = []
    programs = 0
    effects = 0
    for threads in _bounded_reorder_programs(bound, canonicalize):
        pairs = _adjacent_read_pairs(threads)
        if not pairs:
            continue
        programs += 1
        prog = load_program(_sweep_program_text(threads))
        (p,) = pretraces_of(prog)
        stop = False
        for l1, l2 in pairs:
            tr = make_effect(p, "reorder_rr", l1, l2)
            effects += 1
            report = effect_safe(m, p, tr)
            if not report.safe:
                counterexamples.append(
                    {
                        "encoding": threads,
                        "pair": (l1, l2),
                        "program": _sweep_program_text(threads),
                        "note": report.note,
                        "witness": report.witness,
                    }
                )
                if stop_after and len(counterexamples) >= stop_after:
                    stop = True
                    break
        if stop:
            break
    return MetaVerdict(
        "Sound",
        not counterexamples,
        counterexamples,
        f"reorder_rr under {m.name}: {programs} programs, {effects} "
        f"effects (threads<={bound.max_threads}, memory events incl. "
        f"inits<={bound.max_memory_events}, locations<={bound.max_locations})",
    )


DEFAULT_FAMILIES = ("reorder_rr", "eliminate", "inline")


def _family_effects(p: PreTrace, families):
    body = [e for e in p.events if e.tid not in (INIT_TID, FINAL_TID)]
    for fam in families:
        if fam in ("reorder", "reorder_rr"):
            mem = [e for e in body if e.kind in ("R", "W", "U")]
            for a in mem:
                for b in mem:
                    if a.label == b.label or a.tid != b.tid:
                        continue
                    if (a.label, b.label) not in p.po:
                        continue
                    try:
                        yield fam, make_effect(p, fam, a.label, b.label)
                    except EffectError:
                        continue
        elif fam == "eliminate":
            for e in body:
                yield fam, make_effect(p, "eliminate", e.label)
        elif fam == "inline":
            tids = sorted({e.tid for e in body})
            for t_into in tids:
                for t_from in tids:
                    if t_into == t_from:
                        continue
                    yield fam, make_effect(p, "inline", t_into, t_from)
        else:
            raise AnalysisError(f"unknown effect family {fam!r}")


def complete_search(
    m: MemoryModel,
    b: MemoryModel,
    corpus,
    families=None,
    write_elim: str = "allow",
    stop_after=None,
    limit=None,
) -> MetaVerdict:
    """Search the corpus for an effect safe under b yet unsafe under m.
    corpus is an iterable of (name, pretrace).  Callers wanting the
    full meta-property should confirm check_weak(m, b) separately.
    write_elim narrows the sweep: "exclude" skips effects removing a
    write, "only" keeps just those, "allow" takes everything."""
    if write_elim not in ("allow", "exclude", "only"):
        raise AnalysisError(f"unknown write_elim mode {write_elim!r}")
    fams = DEFAULT_FAMILIES if families is None else tuple(families)
    counterexamples = []
    checked = 0
    done = False
    for prog_name, p in corpus:
        if done:
            break
        for fam, tr in _family_effects(p, fams):
            removes = tr.removes_writes()
            if write_elim == "exclude" and removes:
                continue
            if write_elim == "only" and not removes:
                continue
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    checked += 1
                    rep_m = effect_safe(m, p, tr, limit=limit, force=True)
                    if rep_m.safe:
                        continue
                    rep_b = effect_safe(b, p, tr, limit=limit, force=True)
            except (EffectError, ExplosionError):
                continue
            if rep_b.safe:
                counterexamples.append(
                    {
                        "program": prog_name,
                        "family": fam,
                        "effect": tr.describe(),
                        "witness_outcome": (
                            outcome_of(rep_m.witness).render()
                            if rep_m.witness is not None
                            else ""
                        ),
                        "witness": rep_m.witness,
                    }
                )
                if stop_after and len(counterexamples) >= stop_after:
                    done = True
                    break
    return MetaVerdict(
        "Complete",
        not counterexamples,
        counterexamples,
        f"{m.name} vs {b.name}: families {', '.join(fams)}, write "
        f"elimination {write_elim}, {checked} effects over the corpus",
    )


def redundancy_witnesses(m: MemoryModel, corpus) -> MetaVerdict:
    """For every ordered rule pair find a corpus execution violating
    the first rule but not the second.  corpus is an iterable of
    (name, execution); the scan stops once all pairs are witnessed."""
    names = [r.name for r in m.rules]
    wanted = {(r1, r2) for r1 in names for r2 in names if r1 != r2}
    witnesses = {}
    checked = 0
    for name, e in corpus:
        if not wanted:
            break
        checked += 1
        violated = violated_rule_names(m, e)
        if not violated:
            continue
        for r1 in violated:
            for r2 in names:
                if r2 in violated:
                    continue
                if (r1, r2) in wanted:
                    wanted.remove((r1, r2))
                    witnesses[(r1, r2)] = name
    missing = sorted(wanted)
    return MetaVerdict(
        "NonRedundant",
        not missing,
        [{"pair": pair} for pair in missing],
        f"{m.name}: {len(names) * (len(names) - 1)} ordered rule pairs, "
        f"{checked} executions scanned",
        details={"witnesses": witnesses},
    )
