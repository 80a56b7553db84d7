"""Effect construction, application, diffing, and safety verdicts."""
import pytest

from memlit.execution import enumerate_candidates, executions_comparable, outcome_of
from memlit.litmus import WRITE, Event, load_program
from memlit.models import builtin_model, parse_model_dsl
from memlit.pretrace import attach_final_reads, enumerate_pretraces, pretraces_of
from memlit.transform import (
    EffectError,
    TransformationEffect,
    apply_effect,
    check_no_new_writes,
    diff_effect,
    effect_safe,
    make_effect,
    transformation_safe,
    unsafe_executions,
)

SB = """
init { x = 0; y = 0; }
thread 1 { A1: x = 1; A2: a = y; }
thread 2 { A3: y = 1; A4: b = x; }
exists(a = 0 /\\ b = 0)
"""

SB_RO = """
init { x = 0; y = 0; }
thread 1 { A2: a = y; A1: x = 1; }
thread 2 { A3: y = 1; A4: b = x; }
exists(a = 0 /\\ b = 0)
"""

MP = """
init { x = 0; y = 0; }
thread 1 { A1: x = 1; A2: y = 1; }
thread 2 { A3: a = y; A4: b = x; }
exists(a = 1 /\\ b = 0)
"""

MP_RR = """
init { x = 0; y = 0; }
thread 1 { A1: x = 1; A2: y = 1; }
thread 2 { A4: b = x; A3: a = y; }
exists(a = 1 /\\ b = 0)
"""

WELIM = """
init { x = 0; y = 0; z = 0; }
thread 1 { A1: x = 1; A2: y = 1; }
thread 2 { A3: a = y; A4: z = 0; A5: b = x; }
exists(a = 1 /\\ b = 0)
"""

WELIM_T = """
init { x = 0; y = 0; z = 0; }
thread 1 { A1: x = 1; A2: y = 1; }
thread 2 { A3: a = y; A5: b = x; }
exists(a = 1 /\\ b = 0)
"""

THREE = """
init { x = 0; }
thread 1 { A1: x = 1; A2: x = 2; A3: x = 3; }
"""


def pt(src):
    (p,) = enumerate_pretraces(load_program(src))
    return p


SC = builtin_model("sc")
SC_RR = builtin_model("sc_rr")


def test_reorder_effect_shape():
    p = pt(SB)
    tr = make_effect(p, "reorder", "A1", "A2")
    assert tr.po_minus == {("A1", "A2")}
    assert tr.po_plus == {("A2", "A1")}
    assert not tr.st_minus and not tr.st_plus and tr.tid_remap is None
    assert "po-(A1,A2)" in tr.describe()


def test_apply_reorder_po():
    p = pt(SB)
    q = apply_effect(p, make_effect(p, "reorder", "A1", "A2"))
    assert ("A2", "A1") in q.po
    assert ("A1", "A2") not in q.po
    assert ("I_x", "A2") in q.po and ("I_y", "A1") in q.po
    assert ("A3", "A4") in q.po
    assert {e.label for e in q.events} == {e.label for e in p.events}


def test_diff_matches_reorder_and_applies_back():
    p, q = pt(SB), pt(SB_RO)
    tr = diff_effect(p, q)
    assert tr.po_minus == {("A1", "A2")}
    assert tr.po_plus == {("A2", "A1")}
    assert not tr.st_minus and not tr.st_plus and tr.tid_remap is None
    r = apply_effect(p, tr)
    assert set(r.events) == set(q.events)
    assert r.po == q.po


def test_diff_label_conflict():
    p = pt(MP)
    other = pt(
        """
        init { x = 0; y = 0; }
        thread 1 { A1: x = 1; A2: y = 1; }
        thread 2 { A3: y = 2; A4: b = x; }
        """
    )
    with pytest.raises(EffectError, match="A3"):
        diff_effect(p, other)


def test_inline_roundtrip_infers_remap():
    p = pt(MP)
    q = apply_effect(p, make_effect(p, "inline", 1, 2))
    assert {e.tid for e in q.events if e.label.startswith("A")} == {1}
    assert ("A2", "A3") in q.po
    tr = diff_effect(p, q)
    assert tr.tid_remap == {2: 1}
    r = apply_effect(p, tr)
    assert r.po == q.po and set(r.events) == set(q.events)


def test_diff_nonfunctional_remap_rejected():
    p = pt(MP)
    q = pt(
        """
        init { x = 0; y = 0; }
        thread 1 { A1: x = 1; A2: y = 1; A3: a = y; }
        thread 2 { A4: b = x; }
        """
    )
    with pytest.raises(EffectError, match="not a function"):
        diff_effect(p, q)


def test_apply_rejects_cycle():
    p = pt(SB)
    with pytest.raises(EffectError, match="cyclic"):
        apply_effect(p, TransformationEffect(po_plus={("A2", "A1")}))


def test_apply_rejects_unordered_thread():
    p = pt(SB)
    ev = Event("N1", 1, WRITE, "x", 2)
    with pytest.raises(EffectError, match="unordered on thread 1"):
        apply_effect(p, TransformationEffect(st_plus={ev}))


def test_apply_rejects_unknown_removal():
    p = pt(SB)
    ghost = Event("Z9", 1, WRITE, "x", 5)
    with pytest.raises(EffectError, match="Z9"):
        apply_effect(p, TransformationEffect(st_minus={ghost}))


def test_sb_reorder_unsafe_under_sc():
    p = pt(SB)
    tr = make_effect(p, "reorder", "A1", "A2")
    report = effect_safe(SC, p, tr)
    assert not report.safe
    assert report.note == "every comparable source execution is inconsistent"
    assert len(report.witness_partners) == 1
    assert report.checked_pairs > 0
    outcomes = {
        tuple(sorted(outcome_of(c).locals.items()))
        for c, _ in unsafe_executions(SC, p, tr)
    }
    assert (("a", 0), ("b", 0)) in outcomes


def test_sb_reorder_safe_under_porf():
    p = pt(SB)
    report = effect_safe(builtin_model("porf"), p, make_effect(p, "reorder", "A1", "A2"))
    assert report.safe


def test_prop_unique_partner_when_nothing_removed():
    p = pt(SB)
    q = apply_effect(p, make_effect(p, "reorder", "A1", "A2"))
    p_cands = list(enumerate_candidates(p))
    for c in enumerate_candidates(q):
        partners = [d for d in p_cands if executions_comparable(c, d)]
        assert len(partners) == 1


def test_mp_read_reorder_unsafe_sc_safe_sc_rr():
    p = pt(MP)
    tr = make_effect(p, "reorder_rr", "A3", "A4")
    bad = effect_safe(SC, p, tr)
    assert not bad.safe
    assert outcome_of(bad.witness).locals == {"a": 1, "b": 0}
    good = effect_safe(SC_RR, p, tr)
    assert good.safe


def test_reorder_rr_rejects_writes():
    p = pt(MP)
    with pytest.raises(EffectError, match="plain reads"):
        make_effect(p, "reorder_rr", "A1", "A2")


def test_reorder_rr_rejects_same_location():
    p = pt(
        """
        init { x = 0; }
        thread 1 { A1: a = x; A2: b = x; }
        """
    )
    with pytest.raises(EffectError, match="distinct locations"):
        make_effect(p, "reorder_rr", "A1", "A2")


def test_reorder_rejects_non_adjacent():
    p = pt(WELIM)
    with pytest.raises(EffectError, match="A4 lies between"):
        make_effect(p, "reorder_rr", "A3", "A5")


def test_reorder_rejects_cross_thread():
    p = pt(SB)
    with pytest.raises(EffectError, match="crosses threads"):
        make_effect(p, "reorder", "A2", "A4")


def test_reorder_rejects_unordered_pair():
    p = pt(SB)
    with pytest.raises(EffectError, match="not ordered"):
        make_effect(p, "reorder", "A2", "A1")


def test_reorder_rr_preserves_events():
    p = pt(MP)
    q = apply_effect(p, make_effect(p, "reorder_rr", "A3", "A4"))
    assert set(q.events) == set(p.events)


def test_welim_eliminate_effect_shape():
    p = pt(WELIM)
    tr = make_effect(p, "eliminate", "A4")
    assert {e.label for e in tr.st_minus} == {"A4"}
    assert ("A3", "A4") in tr.po_minus and ("A4", "A5") in tr.po_minus


def test_welim_eliminate_safe_under_sc():
    p = pt(WELIM)
    report = effect_safe(SC, p, make_effect(p, "eliminate", "A4"))
    assert report.safe


def test_welim_eliminate_unsafe_under_sc_rr():
    p = pt(WELIM)
    report = effect_safe(SC_RR, p, make_effect(p, "eliminate", "A4"))
    assert not report.safe
    assert outcome_of(report.witness).locals == {"a": 1, "b": 0}
    assert report.note == "every comparable source execution is inconsistent"


def test_welim_verdict_depends_on_subtraction_semantics():
    p = pt(WELIM)
    pairwise = builtin_model("sc_rr", arr_semantics="pairwise")
    report = effect_safe(pairwise, p, make_effect(p, "eliminate", "A4"))
    assert report.safe  # pairwise subtraction excuses the source cycle


def test_eliminate_bridges_neighbours():
    p = pt(THREE)
    q = apply_effect(p, make_effect(p, "eliminate", "A2"))
    assert "A2" not in q.by_label
    assert ("A1", "A3") in q.po


def test_introduce_fresh_location_is_contained():
    p = pt(SB)
    ev = Event("N1", 1, WRITE, "q", 1)
    tr = make_effect(p, "introduce", ev, "A1", "A2")
    q = apply_effect(p, tr)
    assert ("A1", "N1") in q.po and ("N1", "A2") in q.po
    assert check_no_new_writes(p, q)
    assert effect_safe(SC, p, tr).safe


def test_introduce_visible_write_refused_then_unsafe_when_forced():
    p = pt(SB)
    ev = Event("N1", 1, WRITE, "x", 2)
    tr = make_effect(p, "introduce", ev, "A1", "A2")
    with pytest.warns(UserWarning, match="not contained"):
        with pytest.raises(EffectError, match="force"):
            effect_safe(SC, p, tr)
    with pytest.warns(UserWarning):
        report = effect_safe(SC, p, tr, force=True)
    assert not report.safe
    assert report.note == "no comparable execution of the source pre-trace"
    assert report.witness.rf["A4"] == "N1"


def test_identity_effect_is_safe():
    p = pt(SB)
    tr = TransformationEffect()
    assert tr.is_empty() and tr.describe() == "identity"
    assert effect_safe(SC, p, tr).safe


def test_check_no_new_writes_reflexive():
    p = pt(MP)
    assert check_no_new_writes(p, p)


def test_dsl_clone_gives_same_verdict():
    clone = parse_model_dsl(
        """
        a : mo_total
        b : irreflexive hb
        c : irreflexive mo;hb
        d : irreflexive rb;hb
        e : irreflexive rb;mo;hb
        """,
        name="sc-clone",
    )
    p = pt(SB)
    tr = make_effect(p, "reorder", "A1", "A2")
    ours = effect_safe(SC, p, tr)
    theirs = effect_safe(clone, p, tr)
    assert ours.safe == theirs.safe
    assert outcome_of(ours.witness) == outcome_of(theirs.witness)


def test_apply_keeps_final_reads_last():
    p = attach_final_reads(pt(MP), ["x", "y"])
    q = apply_effect(p, make_effect(p, "reorder_rr", "A3", "A4"))
    assert ("A3", "F_x") in q.po and ("A4", "F_x") in q.po
    assert ("F_x", "F_y") in q.po
    assert [e.label for e in q.events if e.label.startswith("F_")] == ["F_x", "F_y"]


def test_transformation_safe_mp_rr_programs():
    source = pretraces_of(load_program(MP))
    target = pretraces_of(load_program(MP_RR))
    bad = transformation_safe(SC, source, target)
    assert not bad.safe
    assert "pair" in bad.note
    good = transformation_safe(SC_RR, source, target)
    assert good.safe
    assert good.checked_pairs > 0


def test_transformation_safe_welim_programs():
    source = pretraces_of(load_program(WELIM))
    target = pretraces_of(load_program(WELIM_T))
    assert transformation_safe(SC, source, target).safe
    assert not transformation_safe(SC_RR, source, target).safe


def test_transformation_safe_unmatched_pretrace():
    source = pretraces_of(
        load_program(
            """
            init { x = 0; y = 0; }
            thread 1 { a = 1; if (a == 1) { y = 1; } }
            """
        )
    )
    target = pretraces_of(
        load_program(
            """
            init { x = 0; y = 0; }
            thread 1 { a = x; if (a == 1) { y = 1; } }
            """
        )
    )
    assert len(source) == 1 and len(target) == 2
    report = transformation_safe(SC, source, target)
    assert not report.safe
    assert "no comparable source pre-trace" in report.note
