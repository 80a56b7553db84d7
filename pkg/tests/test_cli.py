"""Command-line surface: subcommands, formats, exit codes."""
import json

import pytest

from memlit.cli import main
from memlit.corpus import fixture_text


@pytest.fixture()
def fx():
    from importlib import resources

    def path(name, suffix=".lit"):
        return str(resources.files("memlit") / "fixtures" / (name + suffix))

    return path


@pytest.fixture()
def run(capsys):
    def go(*argv):
        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return go


BRANCH_CONST = """init { x = 0; }
thread 1 {
  a = 1;
  if (a != 0) { A2: x = 1; } else { A3: x = 2; }
}
"""


# -- pretraces ---------------------------------------------------------------


def test_pretraces_text_lists_events(run, fx):
    code, out, _ = run("pretraces", fx("sb"))
    assert code == 0
    assert "pretrace 0: straight-line; 6 events" in out
    assert "A2: R y -> a" in out


def test_pretraces_json_schema(run, fx):
    code, out, _ = run("pretraces", fx("sb"), "--format", "json")
    report = json.loads(out)
    assert code == 0
    assert list(report) == ["pretraces"]
    entry = report["pretraces"][0]
    assert sorted(entry) == ["choices", "events", "po"]
    assert entry["choices"] == {}


def test_pretraces_branch_filter_toggle(run, tmp_path):
    prog = tmp_path / "const.lit"
    prog.write_text(BRANCH_CONST)
    _, filtered, _ = run("pretraces", str(prog))
    assert filtered.count("pretrace ") == 1
    assert "C1=then" in filtered
    _, unfiltered, _ = run("pretraces", str(prog), "--no-branch-filter")
    assert unfiltered.count("pretrace ") == 2


def test_pretraces_dot(run, fx):
    code, out, _ = run("pretraces", fx("sb"), "--format", "dot")
    assert code == 0
    assert out.count("digraph") == 1
    assert out.count("shape=box") == 6


# -- executions --------------------------------------------------------------


def test_executions_text_table(run, fx):
    code, out, _ = run("executions", fx("sb"), "--model", "sc")
    assert code == 0
    assert "model sc: 4 consistent / 92 inconsistent of 96 candidates" in out
    assert "a=0, b=0" in out and "no" in out
    assert "exists(a = 0 /\\ b = 0): violated" in out


def test_executions_json_schema(run, fx):
    code, out, _ = run("executions", fx("sb"), "--model", "sc", "--format", "json")
    report = json.loads(out)
    assert code == 0
    assert sorted(report) == ["outcome_table", "partition", "verdict"]
    row = report["outcome_table"][0]
    assert sorted(row) == ["allowed", "consistent", "inconsistent", "outcome"]
    assert report["verdict"] == "violated"


def test_executions_json_deterministic(run, fx):
    _, first, _ = run("executions", fx("mp"), "--model", "sc_rr", "--format", "json")
    _, second, _ = run("executions", fx("mp"), "--model", "sc_rr", "--format", "json")
    assert first == second


def test_executions_dot_one_graph_per_candidate(run, fx):
    code, out, _ = run("executions", fx("sb"), "--model", "sc", "--format", "dot")
    assert code == 0
    assert out.count("digraph") == 96
    first = out.split("digraph")[1]
    assert first.count("shape=box") == 6


def test_executions_limit_guard(run, fx):
    code, _, err = run("executions", fx("sb"), "--model", "sc", "--limit", "50")
    assert code == 2
    assert "error:" in err


# -- check -------------------------------------------------------------------


def test_check_exit_codes_follow_expectation(run, fx):
    code, out, _ = run("check", fx("sb"), "--model", "sc")
    assert code == 1 and "exists: violated" in out
    code, out, _ = run("check", fx("sb"), "--model", "tso")
    assert code == 0 and "exists: confirmed" in out


def test_check_json_verdict(run, fx):
    code, out, _ = run("check", fx("mp"), "--model", "sc_rr", "--format", "json")
    assert code == 0
    assert json.loads(out)["verdict"] == "confirmed"


def test_check_raw_execution_reports_violations(run, fx):
    code, out, _ = run("check", fx("porf-cyc", ".json"), "--model", "porf")
    assert code == 0
    assert "inconsistent" in out
    assert "rule porf:" in out


def test_check_raw_execution_json(run, fx):
    code, out, _ = run(
        "check", fx("porf-cyc", ".json"), "--model", "porf", "--format", "json"
    )
    report = json.loads(out)
    assert code == 0
    assert report["verdict"] == "inconsistent"
    assert report["violations"][0]["rule"] == "porf"
    assert report["violations"][0]["cycle"]


def test_check_without_predicate(run, tmp_path):
    prog = tmp_path / "plain.lit"
    prog.write_text("init { x = 0; }\nthread 1 { A1: x = 1; }\n")
    code, out, _ = run("check", str(prog), "--model", "sc")
    assert code == 0
    assert "no expectation declared" in out


def test_check_model_flags_accepted(run, fx):
    code, out, _ = run("check", fx("mp-f"), "--model", "sc_rr", "--pairwise-arr")
    assert code == 0 and "confirmed" in out
    code, out, _ = run(
        "check", fx("rmw-atom"), "--model", "sc_rr_ext", "--general-afrr"
    )
    assert code == 1 and "violated" in out


# -- safety ------------------------------------------------------------------


def test_safety_effect_unsafe_with_witness(run, fx):
    code, out, _ = run(
        "safety", fx("mp"), "--effect", "reorder_rr A3 A4", "--model", "sc"
    )
    assert code == 0
    assert "unsafe" in out
    assert "a=1, b=0" in out


def test_safety_effect_safe(run, fx):
    code, out, _ = run(
        "safety", fx("mp"), "--effect", "reorder_rr A3 A4", "--model", "sc_rr"
    )
    assert code == 0
    assert "safe (96 execution pairs checked)" in out


def test_safety_two_file_diff(run, fx):
    code, out, _ = run("safety", fx("welim"), fx("welim-t"), "--model", "sc")
    assert code == 0 and "safe" in out and "unsafe" not in out
    code, out, _ = run("safety", fx("welim"), fx("welim-t"), "--model", "sc_rr")
    assert code == 0 and "unsafe" in out and "a=1, b=0" in out


def test_safety_json_schema(run, fx):
    code, out, _ = run(
        "safety",
        fx("mp"),
        "--effect",
        "reorder_rr A3 A4",
        "--model",
        "sc",
        "--format",
        "json",
    )
    report = json.loads(out)
    assert code == 0
    assert report["verdict"] == "unsafe"
    assert report["witness"]


def test_safety_introduce_effect_parses(run, fx):
    code, out, _ = run(
        "safety",
        fx("sb"),
        "--effect",
        "introduce R A5 1 y - c after A2",
        "--model",
        "sc",
    )
    assert code == 0
    assert "safe (192 execution pairs checked)" in out


def test_safety_eliminate_effect(run, fx):
    code, out, _ = run(
        "safety", fx("sb"), "--effect", "eliminate A2", "--model", "sc"
    )
    assert code == 0
    assert "safe (48 execution pairs checked)" in out


def test_safety_requires_one_input_mode(run, fx):
    code, _, err = run(
        "safety",
        fx("welim"),
        fx("welim-t"),
        "--effect",
        "eliminate A4",
        "--model",
        "sc",
    )
    assert code == 2
    assert "exactly one of --effect or a transformed file" in err
    code, _, err = run("safety", fx("welim"), "--model", "sc")
    assert code == 2


def test_safety_effect_rejects_branchy_program(run, tmp_path):
    prog = tmp_path / "branchy.lit"
    prog.write_text(
        "init { x = 0; y = 0; }\n"
        "thread 1 { A1: a = x; if (a != 0) { A2: y = 1; } else { A3: y = 2; } }\n"
        "thread 2 { A4: x = 1; }\n"
    )
    code, _, err = run(
        "safety", str(prog), "--effect", "eliminate A4", "--model", "sc"
    )
    assert code == 2
    assert "single-pre-trace" in err


def test_safety_unknown_effect_kind(run, fx):
    code, _, err = run("safety", fx("sb"), "--effect", "bogus A1", "--model", "sc")
    assert code == 2
    assert "unknown effect kind" in err


# -- crucial -----------------------------------------------------------------


def test_crucial_minimal_sets(run, fx):
    code, out, _ = run("crucial", fx("porf-cyc", ".json"), "--model", "porf")
    assert code == 0
    assert "minimal crucial sets: {A1}, {A3}" in out


def test_crucial_all_sets(run, fx):
    code, out, _ = run("crucial", fx("porf-cyc", ".json"), "--model", "porf", "--all")
    assert code == 0
    assert "{A1}, {A3}, {A1, A3}" in out


def test_crucial_consistent_input_and_dsl_model(run, fx, tmp_path):
    model = tmp_path / "loose.model"
    model.write_text("order : irreflexive mo\n")
    code, out, _ = run("crucial", fx("porf-cyc", ".json"), "--model", str(model))
    assert code == 0
    assert "consistent; no crucial set applies" in out


# -- meta --------------------------------------------------------------------


def test_meta_weak_counterexample(run, fx):
    code, out, _ = run("meta", "weak", "sc", "sc_rr", fx("mp"))
    assert code == 0
    assert "Weak fails" in out
    assert "name=mp" in out and "a=1, b=0" in out


def test_meta_weak_jobs_equivalent(run, fx):
    base = ["meta", "weak", "sc_rr", "sc", fx("mp"), fx("sb"), "--format", "json"]
    _, seq, _ = run(*base, "--jobs", "1")
    _, par, _ = run(*base, "--jobs", "2")
    assert seq == par
    assert json.loads(seq)["verdict"] == "holds"


def test_meta_complete_scoped(run):
    code, out, _ = run(
        "meta", "complete", "tso", "sc", "--families", "inline", "--stop-after", "1"
    )
    assert code == 0
    assert "Complete fails" in out
    assert "program=inline4" in out


def test_meta_complete_json_schema(run):
    code, out, _ = run(
        "meta",
        "complete",
        "tso",
        "sc",
        "--families",
        "inline",
        "--stop-after",
        "1",
        "--format",
        "json",
    )
    report = json.loads(out)
    assert code == 0
    assert report["verdict"] == "fails"
    cx = report["counterexamples"][0]
    assert cx["program"] == "inline4"
    assert cx["family"] == "inline"
    assert cx["witness_outcome"] == "a=1, b=1, c=1, d=0"


def test_meta_sound_rr_tiny_bound(run):
    code, out, _ = run(
        "meta",
        "sound-rr",
        "sc_rr",
        "--max-threads",
        "2",
        "--max-memory-events",
        "4",
        "--max-locations",
        "2",
    )
    assert code == 0
    assert "Sound holds" in out
    assert "1 programs, 1 effects" in out


def test_meta_redundancy_vacuous_model(run):
    code, out, _ = run("meta", "redundancy", "porf")
    assert code == 0
    assert "NonRedundant holds" in out
    assert "0 ordered rule pairs" in out


# -- configuration errors ----------------------------------------------------


def test_unknown_model_exits_2(run, fx):
    code, _, err = run("check", fx("sb"), "--model", "zzz")
    assert code == 2
    assert "unknown model" in err


def test_missing_file_exits_2(run):
    code, _, err = run("check", "/nonexistent.lit", "--model", "sc")
    assert code == 2
    assert "error:" in err


def test_nonpositive_limit_exits_2(run, fx):
    code, _, err = run("executions", fx("sb"), "--model", "sc", "--limit", "0")
    assert code == 2
    assert "--limit must be positive" in err


def test_nonpositive_jobs_exits_2(run, fx):
    code, _, err = run("meta", "weak", "sc_rr", "sc", fx("mp"), "--jobs", "0")
    assert code == 2
    assert "--jobs" in err


def test_fixture_headers_do_not_leak_into_parsing(fx):
    text = fixture_text("sb")
    assert text.startswith("# expect: ")
