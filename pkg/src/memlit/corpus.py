"""Bundled litmus programs and raw executions.

Program fixtures (.lit) exercise the frontend end to end; raw
executions (.json) pin down graphs that no program enumeration would
produce, such as the single-rule violation witnesses.
"""
from __future__ import annotations

import json
from importlib import resources

from .execution import enumerate_candidates, execution_from_raw
from .litmus import AbstractProgram, load_program
from .pretrace import pretraces_of


def _fixture_dir():
    return resources.files(__package__) / "fixtures"


def fixture_names(suffix: str) -> list:
    out = [
        entry.name[: -len(suffix)]
        for entry in _fixture_dir().iterdir()
        if entry.name.endswith(suffix)
    ]
    return sorted(out)


def program_names() -> list:
    return fixture_names(".lit")


def raw_names() -> list:
    return fixture_names(".json")


def fixture_text(name: str, suffix: str = ".lit") -> str:
    path = _fixture_dir() / (name + suffix)
    return path.read_text()


def load_fixture_program(name: str) -> AbstractProgram:
    return load_program(fixture_text(name))


def program_expectations(name: str) -> dict:
    """Model -> verdict table from the fixture's expect header."""
    for line in fixture_text(name).splitlines():
        if line.startswith("# expect:"):
            return json.loads(line[len("# expect:"):])
    raise KeyError(f"fixture {name} has no expect header")


def load_raw(name: str) -> dict:
    return json.loads(fixture_text(name, ".json"))


def load_raw_execution(name: str):
    return execution_from_raw(load_raw(name))


def corpus_pretraces(with_finals: bool = True):
    """(fixture name, pre-trace) pairs over every bundled program."""
    for name in program_names():
        prog = load_fixture_program(name)
        for p in pretraces_of(prog, with_finals=with_finals):
            yield name, p


def corpus_executions(
    with_finals: bool = True,
    include_raw: bool = True,
    raw_first: bool = False,
):
    """(fixture name, execution) pairs: every candidate of every
    bundled program, plus the raw graphs.  raw_first puts the curated
    raw graphs ahead of the program sweep, which helps searches that
    stop early."""
    if include_raw and raw_first:
        for name in raw_names():
            yield name, load_raw_execution(name)
    for name, p in corpus_pretraces(with_finals):
        for c in enumerate_candidates(p):
            yield name, c
    if include_raw and not raw_first:
        for name in raw_names():
            yield name, load_raw_execution(name)
