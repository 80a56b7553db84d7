"""Command-line driver.

Subcommands: pretraces, executions, check, safety, crucial, and the
meta searches (weak, sound-rr, complete, redundancy).  Inputs are
litmus programs (.lit) or raw execution graphs (.json); models are
builtin names or paths to rule files in the model DSL.  Exit status is
0 when the run succeeds (for check: when the declared expectation is
met), 1 when a declared expectation fails, 2 on any error.
"""
import argparse
import concurrent.futures
import itertools
import json
import os
import sys

from .analysis import (
    AnalysisError,
    MetaVerdict,
    SoundBound,
    check_sound_rr,
    check_weak,
    complete_search,
    crucial_sets,
    minimal_crucial_sets,
    redundancy_witnesses,
)
from .corpus import corpus_executions, corpus_pretraces
from .execution import (
    ExplosionError,
    enumerate_candidates,
    eval_predicate,
    execution_from_raw,
    outcome_of,
)
from .litmus import Event, LitmusError, load_program
from .models import (
    ModelError,
    builtin_model,
    check_consistent,
    is_consistent,
    parse_model_dsl,
)
from .output import (
    dot_export,
    dot_export_pretraces,
    event_text,
    execution_dict,
    meta_dict,
    pretrace_dict,
    safety_dict,
    to_json,
    verdict_dict,
)
from .pretrace import pretraces_of
from .relalg import RelAlgError, label_key
from .transform import (
    EffectError,
    effect_safe,
    make_effect,
    transformation_safe,
)

_ERRORS = (
    AnalysisError,
    EffectError,
    ExplosionError,
    LitmusError,
    ModelError,
    RelAlgError,
    OSError,
    json.JSONDecodeError,
)


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def resolve_model(name: str, args):
    if os.path.exists(name):
        with open(name) as fh:
            text = fh.read()
        stem = os.path.splitext(os.path.basename(name))[0]
        return parse_model_dsl(text, name=stem)
    kwargs = {}
    if getattr(args, "pairwise_arr", False):
        kwargs["arr_semantics"] = "pairwise"
    if getattr(args, "general_afrr", False):
        kwargs["general_afrr"] = True
    return builtin_model(name, **kwargs)


def load_input(path: str):
    """(kind, object): a parsed program or a raw execution graph."""
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        return "execution", execution_from_raw(json.loads(text))
    return "program", load_program(text)


def load_program_input(path: str):
    kind, obj = load_input(path)
    if kind != "program":
        raise ConfigError(f"{path} is a raw execution; a program is needed")
    return obj


def input_pretraces(prog, args) -> list:
    return pretraces_of(
        prog,
        filtered=not args.no_branch_filter,
        with_finals=not args.no_finals,
    )


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def execution_corpus(paths, args):
    """(name, execution) pairs from the given files, or the bundled
    corpus when none are named."""
    if not paths:
        yield from corpus_executions(with_finals=not args.no_finals)
        return
    for path in paths:
        kind, obj = load_input(path)
        if kind == "execution":
            yield _stem(path), obj
        else:
            for p in input_pretraces(obj, args):
                for c in enumerate_candidates(p, **_limit_kwargs(args)):
                    yield _stem(path), c


def pretrace_corpus(paths, args):
    if not paths:
        yield from corpus_pretraces(with_finals=not args.no_finals)
        return
    for path in paths:
        prog = load_program_input(path)
        for p in input_pretraces(prog, args):
            yield _stem(path), p


def _limit_kwargs(args):
    limit = getattr(args, "limit", None)
    return {} if limit is None else {"limit": limit}


def emit(args, text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# Effect strings
# ---------------------------------------------------------------------------


def parse_effect_text(p, text: str):
    """reorder L1 L2 | reorder_rr L1 L2 | eliminate L | inline T1 T2 |
    introduce KIND LABEL TID LOC VALUE DEST [after L] [before L]
    (VALUE and DEST take - for none)"""
    toks = text.split()
    if not toks:
        raise EffectError("empty effect")
    kind, rest = toks[0], toks[1:]
    if kind in ("reorder", "reorder_rr"):
        if len(rest) != 2:
            raise EffectError(f"{kind} takes two labels")
        return make_effect(p, kind, *rest)
    if kind == "eliminate":
        if len(rest) != 1:
            raise EffectError("eliminate takes one label")
        return make_effect(p, "eliminate", rest[0])
    if kind == "inline":
        if len(rest) != 2:
            raise EffectError("inline takes two thread ids")
        try:
            tids = [int(t) for t in rest]
        except ValueError:
            raise EffectError("inline thread ids must be integers")
        return make_effect(p, "inline", *tids)
    if kind == "introduce":
        if len(rest) < 6:
            raise EffectError(
                "introduce takes KIND LABEL TID LOC VALUE DEST"
            )
        ekind, label, tid, loc, value, dest = rest[:6]
        after = before = None
        tail = rest[6:]
        while tail:
            if len(tail) < 2 or tail[0] not in ("after", "before"):
                raise EffectError(
                    f"unexpected introduce argument {tail[0]!r}"
                )
            if tail[0] == "after":
                after = tail[1]
            else:
                before = tail[1]
            tail = tail[2:]
        try:
            ev = Event(
                label,
                int(tid),
                ekind,
                None if loc == "-" else loc,
                None if value == "-" else int(value),
                None if dest == "-" else dest,
            )
        except ValueError:
            raise EffectError("introduce TID and VALUE must be integers")
        return make_effect(p, "introduce", ev, after, before)
    raise EffectError(f"unknown effect kind {kind!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_pretraces(args) -> int:
    prog = load_program_input(args.file)
    ps = input_pretraces(prog, args)
    if args.format == "json":
        emit(args, to_json({"pretraces": [pretrace_dict(p) for p in ps]}))
        return 0
    if args.format == "dot":
        emit(args, dot_export_pretraces(ps))
        return 0
    from .output import topological_labels

    lines = []
    for i, p in enumerate(ps):
        lines.append(
            f"pretrace {i}: {p.describe()}; {len(p.events)} events"
        )
        for lab in topological_labels(p.events, p.po):
            lines.append("  " + event_text(p.event(lab)))
    emit(args, "\n".join(lines))
    return 0


def _outcome_rows(m, ps, args):
    """Aggregated (outcome, consistent count, inconsistent count) table
    plus the satisfying-consistent-candidate count for the predicate."""
    rows = {}
    totals = [0, 0]
    for p in ps:
        for c in enumerate_candidates(p, **_limit_kwargs(args)):
            ok = is_consistent(m, c)
            row = rows.setdefault(outcome_of(c).render(), [0, 0])
            row[0 if ok else 1] += 1
            totals[0 if ok else 1] += 1
    return rows, totals


def _predicate_met(prog, m, ps, args):
    sat = 0
    for p in ps:
        for c in enumerate_candidates(p, **_limit_kwargs(args)):
            if is_consistent(m, c) and eval_predicate(
                outcome_of(c), prog.predicate
            ):
                sat += 1
    if prog.predicate.quantifier == "exists":
        return sat > 0, sat
    return sat == 0, sat


def cmd_executions(args) -> int:
    prog = load_program_input(args.file)
    m = resolve_model(args.model, args)
    ps = input_pretraces(prog, args)
    if args.format == "dot":
        execs, titles = [], []
        for p in ps:
            for c in enumerate_candidates(p, **_limit_kwargs(args)):
                verdict = (
                    "consistent" if is_consistent(m, c) else "inconsistent"
                )
                execs.append(c)
                titles.append(f"{outcome_of(c).render()} [{verdict}]")
        emit(args, dot_export(execs, titles))
        return 0
    rows, totals = _outcome_rows(m, ps, args)
    table = [
        {
            "outcome": out,
            "consistent": cons,
            "inconsistent": incons,
            "allowed": cons > 0,
        }
        for out, (cons, incons) in sorted(rows.items())
    ]
    payload = {
        "partition": {"consistent": totals[0], "inconsistent": totals[1]},
        "outcome_table": table,
    }
    if prog.predicate is not None:
        met, _ = _predicate_met(prog, m, ps, args)
        payload["verdict"] = "confirmed" if met else "violated"
    if args.format == "json":
        emit(args, to_json(payload))
        return 0
    lines = [
        f"model {m.name}: {totals[0]} consistent / {totals[1]} "
        f"inconsistent of {totals[0] + totals[1]} candidates"
    ]
    width = max((len(r["outcome"]) for r in table), default=7)
    lines.append(
        f"{'outcome'.ljust(width)}  consistent  inconsistent  allowed"
    )
    for r in table:
        lines.append(
            f"{r['outcome'].ljust(width)}  "
            f"{str(r['consistent']).rjust(10)}  "
            f"{str(r['inconsistent']).rjust(12)}  "
            f"{'yes' if r['allowed'] else 'no'}"
        )
    if prog.predicate is not None:
        lines.append(
            f"{prog.predicate.render()}: "
            + ("confirmed" if payload["verdict"] == "confirmed" else "violated")
        )
    emit(args, "\n".join(lines))
    return 0


def cmd_check(args) -> int:
    kind, obj = load_input(args.file)
    m = resolve_model(args.model, args)
    if kind == "execution":
        v = check_consistent(m, obj)
        if args.format == "json":
            emit(args, to_json(verdict_dict(v)))
        elif args.format == "dot":
            emit(args, dot_export([obj]))
        else:
            lines = ["consistent" if v.consistent else "inconsistent"]
            for rule, path in v.violations:
                lines.append(f"  rule {rule}: " + " ".join(str(x) for x in path))
            emit(args, "\n".join(lines))
        return 0
    prog = obj
    ps = input_pretraces(prog, args)
    rows, totals = _outcome_rows(m, ps, args)
    allowed = sorted(out for out, (cons, _) in rows.items() if cons > 0)
    payload = {
        "partition": {"consistent": totals[0], "inconsistent": totals[1]},
        "outcome_table": [
            {
                "outcome": out,
                "consistent": cons,
                "inconsistent": incons,
                "allowed": cons > 0,
            }
            for out, (cons, incons) in sorted(rows.items())
        ],
    }
    if prog.predicate is None:
        payload["verdict"] = "none"
        if args.format == "json":
            emit(args, to_json(payload))
        else:
            emit(
                args,
                f"no expectation declared; {len(allowed)} outcomes allowed",
            )
        return 0
    met, sat = _predicate_met(prog, m, ps, args)
    payload["verdict"] = "confirmed" if met else "violated"
    if args.format == "json":
        emit(args, to_json(payload))
    else:
        status = "confirmed" if met else "violated"
        body = " /\\ ".join(a.render() for a in prog.predicate.atoms)
        line = f"{prog.predicate.quantifier}: {status} ({body})"
        if not met and prog.predicate.quantifier == "forbidden":
            line += f"; {sat} consistent candidates match"
        emit(args, line)
    return 0 if met else 1


def cmd_safety(args) -> int:
    if (args.transformed is None) == (args.effect is None):
        raise ConfigError(
            "safety needs exactly one of --effect or a transformed file"
        )
    m = resolve_model(args.model, args)
    prog = load_program_input(args.file)
    if args.transformed is not None:
        target = load_program_input(args.transformed)
        report = transformation_safe(
            m,
            input_pretraces(prog, args),
            input_pretraces(target, args),
            limit=args.limit,
            semantic_guards=args.semantic_guards,
            force=args.force,
        )
        header = f"{args.file} -> {args.transformed} under {m.name}"
    else:
        ps = input_pretraces(prog, args)
        if len(ps) != 1:
            raise ConfigError(
                "--effect applies to single-pre-trace programs; "
                f"this one has {len(ps)}"
            )
        tr = parse_effect_text(ps[0], args.effect)
        report = effect_safe(
            m, ps[0], tr, limit=args.limit, force=args.force
        )
        header = f"effect [{tr.describe()}] under {m.name}"
    if args.format == "json":
        emit(args, to_json(safety_dict(report)))
    else:
        emit(args, header + "\n" + report.render())
    return 0


def cmd_crucial(args) -> int:
    m = resolve_model(args.model, args)
    kind, obj = load_input(args.file)
    finder = crucial_sets if args.all else minimal_crucial_sets

    def sets_of(e):
        return [sorted(cs.reads, key=label_key) for cs in finder(e, m, cap=args.cap)]

    if kind == "execution":
        if is_consistent(m, obj):
            payload = {"verdict": "consistent", "crucial_sets": []}
            emit(
                args,
                to_json(payload)
                if args.format == "json"
                else "consistent; no crucial set applies",
            )
            return 0
        sets = sets_of(obj)
        if args.format == "json":
            emit(
                args,
                to_json({"verdict": "inconsistent", "crucial_sets": sets}),
            )
        else:
            shown = ", ".join("{" + ", ".join(s) + "}" for s in sets)
            tag = "crucial sets" if args.all else "minimal crucial sets"
            emit(args, f"inconsistent; {tag}: {shown or '(none)'}")
        return 0
    results = []
    for p in input_pretraces(obj, args):
        for c in enumerate_candidates(p, **_limit_kwargs(args)):
            if is_consistent(m, c):
                continue
            out = outcome_of(c).render()
            if args.outcome and args.outcome not in out:
                continue
            results.append({"outcome": out, "crucial_sets": sets_of(c)})
    if args.format == "json":
        emit(args, to_json({"executions": results}))
    else:
        lines = []
        for r in results:
            shown = ", ".join(
                "{" + ", ".join(s) + "}" for s in r["crucial_sets"]
            )
            lines.append(f"{r['outcome']}: {shown or '(none)'}")
        emit(args, "\n".join(lines) or "no matching inconsistent executions")
    return 0


# ---------------------------------------------------------------------------
# Meta searches
# ---------------------------------------------------------------------------


def _chunks(items: list, n: int) -> list:
    n = max(1, min(n, len(items)))
    size, extra = divmod(len(items), n)
    out, at = [], 0
    for i in range(n):
        step = size + (1 if i < extra else 0)
        if step:
            out.append(items[at : at + step])
            at += step
    return out


def _weak_chunk(payload):
    w, b, chunk = payload
    return check_weak(w, b, chunk)


def _complete_chunk(payload):
    m, b, chunk, families, write_elim, limit = payload
    return complete_search(
        m, b, chunk, families=families, write_elim=write_elim, limit=limit
    )


def _merge_verdicts(prop: str, parts: list, bound: str) -> MetaVerdict:
    cx = [c for part in parts for c in part.counterexamples]
    return MetaVerdict(prop, not cx, cx, bound)


def _parallel(worker, payloads, jobs):
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, payloads))


def cmd_meta(args) -> int:
    if args.meta_command == "weak":
        w = resolve_model(args.weak_model, args)
        b = resolve_model(args.base_model, args)
        corpus = list(execution_corpus(args.files, args))
        if args.jobs > 1 and not args.stop_after:
            parts = _parallel(
                _weak_chunk,
                [(w, b, ch) for ch in _chunks(corpus, args.jobs)],
                args.jobs,
            )
            checked = sum(len(ch) for ch in _chunks(corpus, args.jobs))
            v = _merge_verdicts(
                "Weak",
                parts,
                f"every {b.name}-consistent execution {w.name}-consistent, "
                f"{checked} corpus executions",
            )
        else:
            v = check_weak(w, b, corpus, stop_after=args.stop_after)
    elif args.meta_command == "sound-rr":
        m = resolve_model(args.model, args)
        bound = SoundBound(
            max_threads=args.max_threads,
            max_memory_events=args.max_memory_events,
            max_locations=args.max_locations,
        )
        v = check_sound_rr(
            m,
            bound=bound,
            stop_after=args.stop_after,
            canonicalize=not args.no_canonical,
        )
    elif args.meta_command == "complete":
        m = resolve_model(args.model, args)
        b = resolve_model(args.base_model, args)
        families = (
            tuple(args.families.split(",")) if args.families else None
        )
        corpus = list(pretrace_corpus(args.files, args))
        if args.jobs > 1 and not args.stop_after:
            payloads = [
                (m, b, ch, families, args.write_elim, args.limit)
                for ch in _chunks(corpus, args.jobs)
            ]
            parts = _parallel(_complete_chunk, payloads, args.jobs)
            fams = families or ("reorder_rr", "eliminate", "inline")
            v = _merge_verdicts(
                "Complete",
                parts,
                f"{m.name} vs {b.name}: families {', '.join(fams)}, write "
                f"elimination {args.write_elim}, {len(corpus)} pre-traces",
            )
        else:
            v = complete_search(
                m,
                b,
                corpus,
                families=families,
                write_elim=args.write_elim,
                stop_after=args.stop_after,
                limit=args.limit,
            )
    else:
        m = resolve_model(args.model, args)
        if args.files:
            corpus = execution_corpus(args.files, args)
        else:
            # raw graphs first: they were curated to witness rule pairs
            corpus = corpus_executions(
                with_finals=not args.no_finals, raw_first=True
            )
        v = redundancy_witnesses(m, corpus)
    emit(args, to_json(meta_dict(v)) if args.format == "json" else v.render())
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memlit",
        description="Litmus-program workbench for axiomatic memory models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format", choices=("text", "json", "dot"), default="text"
    )
    common.add_argument(
        "--no-branch-filter",
        action="store_true",
        help="keep pre-traces whose branch guards are unsatisfiable",
    )
    common.add_argument(
        "--no-finals",
        action="store_true",
        help="drop the final-state reads declared by the program",
    )
    common.add_argument(
        "--limit", type=int, default=None, help="candidate explosion guard"
    )

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument(
        "--model",
        required=True,
        help="builtin model name or path to a model-DSL file",
    )
    model.add_argument(
        "--pairwise-arr",
        action="store_true",
        help="excuse read-read cycles pairwise instead of per path",
    )
    model.add_argument(
        "--general-afrr",
        action="store_true",
        help="lift the same-location restriction on the fenced variant",
    )

    p = sub.add_parser(
        "pretraces", parents=[common], help="list the pre-traces of a program"
    )
    p.add_argument("file")

    p = sub.add_parser(
        "executions",
        parents=[common, model],
        help="partition the candidate executions of a program",
    )
    p.add_argument("file")

    p = sub.add_parser(
        "check",
        parents=[common, model],
        help="evaluate the declared exists/forbidden clause",
    )
    p.add_argument("file")

    p = sub.add_parser(
        "safety",
        parents=[common, model],
        help="decide transformation safety for an effect or a program pair",
    )
    p.add_argument("file")
    p.add_argument("transformed", nargs="?", default=None)
    p.add_argument(
        "--effect",
        default=None,
        help=(
            "reorder L1 L2 | reorder_rr L1 L2 | eliminate L | inline T1 T2 "
            "| introduce KIND LABEL TID LOC VALUE DEST [after L] [before L]"
        ),
    )
    p.add_argument(
        "--semantic-guards",
        action="store_true",
        help="match branch choices by guard meaning, not spelling",
    )
    p.add_argument(
        "--force",
        action="store_true",
        help="skip the no-new-writes containment guard",
    )

    p = sub.add_parser(
        "crucial",
        parents=[common, model],
        help="crucial read sets of inconsistent executions",
    )
    p.add_argument("file")
    p.add_argument(
        "--all", action="store_true", help="every crucial set, not just minimal"
    )
    p.add_argument(
        "--outcome", default=None, help="only executions whose outcome contains this"
    )
    p.add_argument(
        "--cap", type=int, default=128, help="read-subset search cap"
    )

    meta = sub.add_parser("meta", help="bounded meta-property searches")
    msub = meta.add_subparsers(dest="meta_command", required=True)

    jobs = argparse.ArgumentParser(add_help=False)
    jobs.add_argument(
        "--jobs", type=int, default=1, help="worker process bound"
    )
    jobs.add_argument("--stop-after", type=int, default=None)

    p = msub.add_parser(
        "weak",
        parents=[common, jobs],
        help="does the first model allow every execution the second allows",
    )
    p.add_argument("weak_model")
    p.add_argument("base_model")
    p.add_argument("files", nargs="*")

    p = msub.add_parser(
        "sound-rr",
        parents=[common, jobs],
        help="sweep read-read reorderings over a bounded program family",
    )
    p.add_argument("model")
    p.add_argument("--max-threads", type=int, default=3)
    p.add_argument("--max-memory-events", type=int, default=6)
    p.add_argument("--max-locations", type=int, default=3)
    p.add_argument(
        "--no-canonical",
        action="store_true",
        help="skip program deduplication (oracle mode)",
    )

    p = msub.add_parser(
        "complete",
        parents=[common, jobs],
        help="search the corpus for an effect separating two models",
    )
    p.add_argument("model")
    p.add_argument("base_model")
    p.add_argument("files", nargs="*")
    p.add_argument(
        "--families",
        default=None,
        help="comma-separated effect families (reorder_rr,eliminate,inline)",
    )
    p.add_argument(
        "--write-elim",
        choices=("allow", "exclude", "only"),
        default="allow",
        help="treatment of effects that remove a write",
    )

    p = msub.add_parser(
        "redundancy",
        parents=[common, jobs],
        help="witness every ordered rule pair of a model",
    )
    p.add_argument("model")
    p.add_argument("files", nargs="*")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("limit", "cap", "jobs"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return 2
    try:
        if args.command == "pretraces":
            return cmd_pretraces(args)
        if args.command == "executions":
            return cmd_executions(args)
        if args.command == "check":
            return cmd_check(args)
        if args.command == "safety":
            return cmd_safety(args)
        if args.command == "crucial":
            return cmd_crucial(args)
        return cmd_meta(args)
    except _ERRORS + (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
