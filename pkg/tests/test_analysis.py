"""Crucial sets, read diagnosis, piecewise extension, unsafety
witnesses, cycle shapes, and the meta-property searches."""
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from memlit.analysis import (
    AnalysisError,
    SoundBound,
    arr_cycle_pairs,
    canonical_program,
    check_sound_rr,
    check_weak,
    classify_cycle_shapes,
    complete_search,
    cra_bruteforce,
    cra_noncontainment_violations,
    cra_sc_closed_form,
    crucial_sets,
    minimal_crucial_sets,
    piecewise_extend,
    redundancy_witnesses,
    remove_rf,
    shape_obligations,
    unsafety_witness,
)
from memlit.corpus import (
    load_fixture_program,
    load_raw,
    load_raw_execution,
    raw_names,
)
from memlit.execution import (
    Execution,
    derived_relations,
    enumerate_candidates,
    eval_predicate,
    execution_from_raw,
    executions_comparable,
    is_candidate,
    outcome_of,
)
from memlit.litmus import Event, load_program
from memlit.models import builtin_model, is_consistent, parse_model_dsl
from memlit.pretrace import enumerate_pretraces, pretraces_of
from memlit.transform import TransformationEffect, make_effect

SB = """
init { x = 0; y = 0; }
thread 1 { x = 1; a = y; }
thread 2 { y = 1; b = x; }
exists(a = 0 /\\ b = 0)
"""

MP = """
init { x = 0; y = 0; }
thread 1 { x = 1; y = 1; }
thread 2 { a = y; b = x; }
forbidden(a = 1 /\\ b = 0)
"""

SC = builtin_model("sc")
SC_RR = builtin_model("sc_rr")
TSO = builtin_model("tso")
PORF = builtin_model("porf")


def single_pretrace(text):
    (p,) = enumerate_pretraces(load_program(text))
    return p


def find_candidate(p, rf, mo_chain):
    pairs = list(itertools.pairwise(mo_chain))
    for c in enumerate_candidates(p):
        if c.rf == rf and all(x in c.mo for x in pairs):
            return c
    raise AssertionError("no candidate with that rf/mo")


def sb_weak(mo_chain=("I_x", "I_y", "A1", "A3")):
    p = single_pretrace(SB)
    return find_candidate(p, {"A2": "I_y", "A4": "I_x"}, list(mo_chain))


def mp_weak():
    p = single_pretrace(MP)
    return find_candidate(
        p, {"A3": "A2", "A4": "I_x"}, ["I_x", "I_y", "A1", "A2"]
    )


def mp_base():
    # a=1, b=1; the sc-consistent candidate the repairs walk back to
    p = single_pretrace(MP)
    return find_candidate(
        p, {"A3": "A2", "A4": "A1"}, ["I_x", "I_y", "A1", "A2"]
    )


# Crucial sets ----------------------------------------------------------------


def test_porf_cycle_crucial_sets():
    e = load_raw_execution("porf-cyc")
    mins = minimal_crucial_sets(e, PORF)
    assert sorted(sorted(cs.reads) for cs in mins) == [["A1"], ["A3"]]
    alls = crucial_sets(e, PORF)
    assert sorted(sorted(cs.reads) for cs in alls) == [
        ["A1"],
        ["A1", "A3"],
        ["A3"],
    ]
    for cs in alls:
        assert is_consistent(PORF, cs.repaired)
        assert cs.repaired.mo == e.mo
        assert cs.repaired.pretrace is e.pretrace
        assert set(cs.repaired.rf) == set(e.rf) - cs.reads


def test_order_cycle_has_no_crucial_set():
    # the cycle runs through po and mo alone, so no rf deletion helps
    raw = load_raw("ex-mem-model")
    m = parse_model_dsl(raw["expect"]["dsl"])
    e = load_raw_execution("ex-mem-model")
    assert not is_consistent(m, e)
    assert crucial_sets(e, m) == raw["expect"]["crucial_sets"] == []


def test_crucial_sets_reject_consistent_execution():
    with pytest.raises(AnalysisError, match="already consistent"):
        crucial_sets(mp_base(), SC)


def test_crucial_set_search_cap_warns():
    e = load_raw_execution("porf-cyc")
    with pytest.warns(UserWarning, match="truncated after 1"):
        found = crucial_sets(e, PORF, cap=1)
    assert [sorted(cs.reads) for cs in found] == [["A1"]]


def test_remove_rf_unknown_read():
    with pytest.raises(AnalysisError, match="no rf edge to remove for A9"):
        remove_rf(mp_weak(), ["A9"])


@given(st.sets(st.sampled_from(["A2", "A4"])))
@settings(max_examples=20, deadline=None)
def test_remove_rf_only_shrinks_derived_relations(reads):
    e = sb_weak()
    cut = remove_rf(e, reads)
    before = derived_relations(e)
    after = derived_relations(cut)
    for name in ("rf", "rfe", "rfi", "rb"):
        assert set(after.relation(name).pairs()) <= set(
            before.relation(name).pairs()
        )
    hb_before = before.relation("po").union(before.relation("rf")).closure()
    hb_after = after.relation("po").union(after.relation("rf")).closure()
    assert set(hb_after.pairs()) <= set(hb_before.pairs())
    assert after.relation("po").pairs() == before.relation("po").pairs()
    assert after.relation("mo").pairs() == before.relation("mo").pairs()


@pytest.mark.parametrize(
    "text,expect_checked", [(SB, 4), (MP, 1)]
)
def test_coherent_inconsistent_candidates_have_repairs(text, expect_checked):
    # whenever mo;po is acyclic an inconsistency is pinned on rf, and
    # every minimal repair walks back to a consistent candidate with
    # the same mo
    p = single_pretrace(text)
    checked = 0
    for c in enumerate_candidates(p):
        if is_consistent(SC, c):
            continue
        env = derived_relations(c)
        mopo = env.relation("mo").compose(env.relation("po"))
        if not mopo.is_irreflexive():
            continue
        checked += 1
        mins = minimal_crucial_sets(c, SC)
        assert mins
        for cs in mins:
            ext = piecewise_extend(cs.repaired, SC)
            assert ext is not None
            assert is_consistent(SC, ext)
            assert ext.mo == c.mo
    assert checked == expect_checked


# Single-read diagnosis --------------------------------------------------------


def test_sb_rule_e_diagnosis_follows_mo_direction():
    c1 = sb_weak(("I_x", "I_y", "A1", "A3"))
    assert cra_bruteforce(SC.rule("e").body, c1) == frozenset({"A4"})
    assert cra_sc_closed_form("e", c1) == frozenset({"A4"})
    c2 = sb_weak(("I_x", "I_y", "A3", "A1"))
    assert cra_bruteforce(SC.rule("e").body, c2) == frozenset({"A2"})
    assert cra_sc_closed_form("e", c2) == frozenset({"A2"})


def test_mp_weak_diagnosis_spans_both_reads():
    c = mp_weak()
    for rule in ("d", "e"):
        assert cra_bruteforce(SC.rule(rule).body, c) == frozenset(
            {"A3", "A4"}
        )
    for rule in ("b", "c"):
        assert cra_bruteforce(SC.rule(rule).body, c) == frozenset()


def test_porf_cycle_diagnosis():
    e = load_raw_execution("porf-cyc")
    expect = frozenset({"A1", "A3"})
    assert cra_bruteforce(PORF.rules[0].body, e) == expect
    assert cra_sc_closed_form("b", e) == expect


@pytest.mark.parametrize("rule", ["b", "c", "d", "e"])
def test_closed_form_matches_bruteforce(rule):
    body = SC.rule(rule).body
    for c in (sb_weak(), sb_weak(("I_x", "I_y", "A3", "A1")), mp_weak()):
        assert cra_sc_closed_form(rule, c) == cra_bruteforce(body, c)


def test_mo_totality_immune_to_rf_deletion():
    raw = execution_from_raw(
        {
            "events": [
                {"label": "W1", "tid": 1, "kind": "W", "loc": "x", "value": 1},
                {"label": "W2", "tid": 2, "kind": "W", "loc": "x", "value": 2},
            ],
            "po": [],
            "rf": {},
            "mo": [],
        }
    )
    assert cra_bruteforce(None, raw) == frozenset()
    assert cra_sc_closed_form("a", raw) == frozenset()


def test_satisfied_rule_diagnoses_empty():
    c = mp_base()
    assert cra_bruteforce(SC.rule("e").body, c) == frozenset()
    assert cra_sc_closed_form("e", c) == frozenset()


def test_closed_form_unknown_rule():
    with pytest.raises(AnalysisError, match="no closed form"):
        cra_sc_closed_form("z", mp_weak())


# Piecewise extension ----------------------------------------------------------


def test_extension_restores_deleted_edges():
    base = mp_base()
    part = remove_rf(base, ["A4"])
    for method in ("guided", "exhaustive"):
        ext = piecewise_extend(part, SC, method=method)
        assert ext.rf == base.rf
        assert is_candidate(ext) and is_consistent(SC, ext)


def test_guided_and_exhaustive_may_pick_different_writes():
    # both must land on a consistent candidate; which write a read
    # returns to is not canonical
    part = remove_rf(mp_base(), ["A3"])
    g = piecewise_extend(part, SC, method="guided")
    x = piecewise_extend(part, SC, method="exhaustive")
    for ext in (g, x):
        assert is_candidate(ext) and is_consistent(SC, ext)
        assert ext.rf["A4"] == "A1"
    assert g.rf["A3"] == "A2"  # first try at the mo-maximal write sticks
    assert x.rf["A3"] == "I_y"


def test_guided_walk_steps_to_earlier_write():
    # reattaching a=y at the mo-maximal write rebuilds the violation,
    # so the walk moves one write down and settles at the init
    part = remove_rf(mp_weak(), ["A3"])
    assert is_consistent(SC, part)
    g = piecewise_extend(part, SC, method="guided")
    x = piecewise_extend(part, SC, method="exhaustive")
    assert g.rf == x.rf == {"A4": "I_x", "A3": "I_y"}
    assert is_consistent(SC, g)


def test_auto_method_picks_guided_exactly_for_sc():
    part = remove_rf(mp_base(), ["A3"])
    auto = piecewise_extend(part, SC)
    assert auto.rf == piecewise_extend(part, SC, method="guided").rf
    assert (
        piecewise_extend(part, TSO).rf
        == piecewise_extend(part, TSO, method="exhaustive").rf
    )


def test_candidate_input_returned_unchanged():
    base = mp_base()
    assert piecewise_extend(base, SC) is base


def test_extension_rejects_inconsistent_input():
    with pytest.raises(AnalysisError, match="only consistent"):
        piecewise_extend(mp_weak(), SC)


def test_extension_rejects_malformed_rf():
    base = mp_base()
    bad = Execution(base.pretrace, {"A3": "A1"}, base.mo)  # A3 reads y, A1 writes x
    with pytest.raises(AnalysisError, match="malformed"):
        piecewise_extend(bad, SC)


def test_guided_walk_needs_the_sc_rules():
    part = remove_rf(mp_base(), ["A3"])
    with pytest.raises(AnalysisError, match="only the sc rule set"):
        piecewise_extend(part, TSO, method="guided")


def test_extension_needs_a_write_per_location():
    raw = execution_from_raw(
        {
            "events": [
                {"label": "R1", "tid": 1, "kind": "R", "loc": "x", "value": 0},
            ],
            "po": [],
            "rf": {},
            "mo": [],
        }
    )
    with pytest.raises(AnalysisError, match="no write to extend from"):
        piecewise_extend(raw, SC)


def test_extension_needs_total_mo():
    raw = execution_from_raw(
        {
            "events": [
                {"label": "W1", "tid": 1, "kind": "W", "loc": "x", "value": 1},
                {"label": "W2", "tid": 2, "kind": "W", "loc": "x", "value": 2},
            ],
            "po": [],
            "rf": {},
            "mo": [],
        }
    )
    with pytest.raises(AnalysisError, match="strict total order"):
        piecewise_extend(raw, PORF)


def test_extension_unknown_method():
    with pytest.raises(AnalysisError, match="unknown extension method"):
        piecewise_extend(mp_base(), SC, method="magic")


# Constructive unsafety ---------------------------------------------------------


def trailing_read_reorder():
    # swap the write-read pair in one thread and give the other thread
    # a trailing read of y; the reordering then admits an outcome no
    # source execution matches
    return TransformationEffect(
        st_plus=frozenset({Event("A5", 2, "R", "y", None, "c")}),
        po_minus=frozenset({("A1", "A2")}),
        po_plus=frozenset({("A2", "A1"), ("A4", "A5")}),
    )


def test_constructed_witness_is_certified():
    p = single_pretrace(SB)
    w = unsafety_witness(p, trailing_read_reorder(), SC)
    assert w is not None
    assert outcome_of(w).render() == "a=0, b=1, c=1"
    assert w.rf == {"A2": "I_y", "A4": "A1", "A5": "A3"}
    assert is_candidate(w)
    assert is_consistent(SC, w)
    partners = [
        d
        for d in enumerate_candidates(p)
        if executions_comparable(w, d)
    ]
    assert partners
    assert all(not is_consistent(SC, d) for d in partners)


def test_pure_reordering_admits_no_constructed_witness():
    # every transformed candidate has a mirror over the same events, so
    # no minimal repair escapes the containment filter
    p = single_pretrace(SB)
    tr = make_effect(p, "reorder", "A1", "A2")
    assert unsafety_witness(p, tr, SC) is None
    from memlit.transform import apply_effect

    q = apply_effect(p, tr)
    cands = list(enumerate_candidates(p))
    nonvacuous = 0
    for eq in enumerate_candidates(q):
        if is_consistent(SC, eq):
            continue
        partners = [d for d in cands if executions_comparable(eq, d)]
        assert partners
        if any(is_consistent(SC, d) for d in partners):
            continue
        partner_mins = [
            pc.reads
            for d in partners
            for pc in minimal_crucial_sets(d, SC)
        ]
        for cr in minimal_crucial_sets(eq, SC):
            nonvacuous += 1
            assert any(pc <= cr.reads for pc in partner_mins)
    assert nonvacuous > 0


def test_read_reordering_admits_no_constructed_witness():
    p = single_pretrace(MP)
    tr = make_effect(p, "reorder_rr", "A3", "A4")
    assert unsafety_witness(p, tr, SC) is None


def test_identity_effect_admits_no_witness():
    p = single_pretrace(SB)
    assert unsafety_witness(p, TransformationEffect(), SC) is None


def test_witness_search_rejects_write_elimination():
    p = pretraces_of(load_fixture_program("welim"))[0]
    tr = make_effect(p, "eliminate", "A4")
    with pytest.raises(AnalysisError, match="write elimination"):
        unsafety_witness(p, tr, SC_RR)


# Cycle shapes ------------------------------------------------------------------


def test_sb_weak_outcome_shape():
    assert classify_cycle_shapes(sb_weak()) == frozenset({"rb;mo?;po"})


def test_consistent_execution_shows_no_shape():
    assert classify_cycle_shapes(mp_base()) == frozenset()


def test_rmw_atomicity_shape():
    prog = load_fixture_program("rmw-atom")
    (p,) = pretraces_of(prog)
    c = find_candidate(
        p, {"U1": "I_y", "F_y": "U1"}, ["I_y", "A2", "U1"]
    )
    assert eval_predicate(outcome_of(c), prog.predicate)
    assert classify_cycle_shapes(c) == frozenset({"rb;mo"})


def test_dead_store_elimination_obligations():
    p = pretraces_of(load_fixture_program("welim"))[0]
    tr = make_effect(p, "eliminate", "A4")
    recs = shape_obligations(p, tr, SC_RR, SC)
    assert len(recs) == 6
    union = set()
    for r in recs:
        assert r.covered
        assert r.deorder_satisfied
        assert not is_consistent(SC_RR, r.source)
        assert is_consistent(SC_RR, r.transformed)
        assert not is_consistent(SC, r.transformed)
        union |= r.shapes
    assert union == {"mo;po", "mo;rfe;po", "rb;mo?;po"}
    deorder = set().union(*(r.deorder_reads for r in recs))
    assert deorder == {"A3"}


def test_read_reordering_obligations_vacuous():
    p = single_pretrace(MP)
    tr = make_effect(p, "reorder_rr", "A3", "A4")
    assert shape_obligations(p, tr, SC_RR, SC) == []


def test_inlining_obligations_vacuous_under_read_read_weakening():
    p = pretraces_of(load_fixture_program("inline4"))[0]
    tr = make_effect(p, "inline", 3, 1)
    assert shape_obligations(p, tr, SC_RR, SC) == []


def test_shape_argument_does_not_extend_to_tso():
    # the buffer-model weakening is not a read-read weakening: its
    # divergent pairs carry none of the catalogued shapes
    p = pretraces_of(load_fixture_program("inline4"))[0]
    tr = make_effect(p, "inline", 3, 1)
    recs = shape_obligations(p, tr, TSO, SC)
    assert len(recs) == 4
    assert all(r.shapes == frozenset() and not r.covered for r in recs)


def test_diagnosis_never_contained_on_read_read_cycles():
    hits = 0
    for name in ("welim", "mp-rr"):
        prog = load_fixture_program(name)
        for p in pretraces_of(prog):
            for c in enumerate_candidates(p):
                if not arr_cycle_pairs(c):
                    continue
                hits += 1
                assert cra_noncontainment_violations(c) == []
                if hits >= 12:
                    return
    raise AssertionError("expected executions with read-read cycles")


# Meta searches -----------------------------------------------------------------


def mp_execution_corpus():
    p = pretraces_of(load_fixture_program("mp"))[0]
    return [("mp", c) for c in enumerate_candidates(p)]


def test_weak_fails_exactly_on_the_relaxed_outcome():
    v = check_weak(SC, SC_RR, mp_execution_corpus())
    assert not v.holds
    assert [c["outcome"] for c in v.counterexamples] == ["a=1, b=0"]
    assert v.render().startswith("Weak fails")


def test_weak_against_itself_holds():
    v = check_weak(SC, SC, mp_execution_corpus())
    assert v.holds
    assert v.render().startswith("Weak holds")


def test_weak_stop_after_caps_counterexamples():
    corpus = mp_execution_corpus() * 2
    v = check_weak(SC, SC_RR, corpus, stop_after=1)
    assert len(v.counterexamples) == 1


def test_canonical_program_collapses_renaming_and_order():
    a = canonical_program(((("W", 0), ("W", 1)), (("R", 1), ("R", 0))), 2)
    b = canonical_program(((("R", 0), ("R", 1)), (("W", 1), ("W", 0))), 2)
    assert a == b


def test_sound_sweep_tiny_bound():
    tiny = SoundBound(max_threads=2, max_memory_events=4, max_locations=2)
    canon = check_sound_rr(SC, bound=tiny)
    raw = check_sound_rr(SC, bound=tiny, canonicalize=False)
    assert canon.holds and raw.holds
    assert "1 programs, 1 effects" in canon.search_bound


def test_complete_search_scoped_to_the_dead_store():
    p = pretraces_of(load_fixture_program("welim"))[0]
    v = complete_search(SC_RR, SC, [("welim", p)], write_elim="only")
    assert not v.holds
    (cx,) = v.counterexamples
    assert cx["program"] == "welim"
    assert cx["family"] == "eliminate"
    assert cx["effect"] == "-A4 po-(A3,A4) po-(A4,A5)"
    assert cx["witness_outcome"] == "a=1, b=0"


def test_complete_search_excluding_write_elimination_holds():
    corpus = [
        ("sb", single_pretrace(SB)),
        ("mp", single_pretrace(MP)),
    ]
    v = complete_search(SC_RR, SC, corpus, write_elim="exclude")
    assert v.holds
    assert v.counterexamples == []


def test_complete_search_unknown_mode():
    with pytest.raises(AnalysisError, match="unknown write_elim mode"):
        complete_search(SC_RR, SC, [], write_elim="never")


def test_rule_pairs_all_witnessed_on_curated_graphs():
    corpus = [(n, load_raw_execution(n)) for n in raw_names()]
    v = redundancy_witnesses(SC, corpus)
    assert v.holds
    assert len(v.details["witnesses"]) == 20


def test_duplicated_rules_reported_unwitnessed():
    dup = parse_model_dsl(
        "p : irreflexive hb\nq : irreflexive (po|rf)+", name="dup"
    )
    corpus = [(n, load_raw_execution(n)) for n in raw_names()]
    v = redundancy_witnesses(dup, corpus)
    assert not v.holds
    assert v.counterexamples == [
        {"pair": ("p", "q")},
        {"pair": ("q", "p")},
    ]


def test_single_rule_model_vacuously_nonredundant():
    v = redundancy_witnesses(PORF, [])
    assert v.holds
    assert "0 ordered rule pairs" in v.search_bound
