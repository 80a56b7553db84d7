"""Litmus-test frontend: concrete syntax to abstract programs.

Grammar (statements end in ';', blocks use braces):

    case     := init thread+ final? assert?
    init     := "init" "{" (LOC "=" INT ";")* "}"
    thread   := "thread" NAT "{" stmt* "}"
    stmt     := [LABEL ":"] simple ";" | [LABEL ":"] ifstmt
    simple   := LOCAL "=" LOC | LOC "=" INT | LOCAL "=" (LOCAL|INT)
              | "rmw" "(" LOCAL "," LOC "," INT ")" | "fence.rr"
    ifstmt   := "if" "(" cond ")" "{" stmt* "}" ["else" "{" stmt* "}"]
    cond     := "true" | "false" | LOCAL "==" INT | LOCAL "!=" INT
    final    := "final" "{" (LOC ";")* "}"
    assert   := ("exists"|"forbidden") "(" atom ("/\\" atom)* ")"
    atom     := LOCAL "=" INT | LOC "@final" "=" INT

An identifier on the right of '=' is a location when it appears in the
init block, otherwise a local.  An identifier on the left of '= INT' is
a location when declared, otherwise a local.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

# Event kinds
READ = "R"
WRITE = "W"
RMW = "U"
FENCE_RR = "F"

INIT_TID = 0
FINAL_TID = -1


class LitmusError(Exception):
    def __init__(self, msg, line=None, col=None):
        if line is not None:
            msg = f"line {line}, col {col}: {msg}"
        super().__init__(msg)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Event:
    """One memory event.  The label is its identity and survives
    transformation; value is the written value for writes and rmw."""

    label: str
    tid: int
    kind: str  # R / W / U / F
    loc: Optional[str]
    value: Optional[int] = None
    dest: Optional[str] = None  # local receiving the read value

    @property
    def is_read(self) -> bool:
        return self.kind in (READ, RMW)

    @property
    def is_write(self) -> bool:
        return self.kind in (WRITE, RMW)


@dataclass(frozen=True)
class Guard:
    op: str  # true / false / eq / ne
    local: Optional[str] = None
    value: Optional[int] = None

    def render(self) -> str:
        if self.op == "true":
            return "true"
        if self.op == "false":
            return "false"
        sym = "==" if self.op == "eq" else "!="
        return f"{self.local}{sym}{self.value}"


# Statement tree ------------------------------------------------------------


@dataclass
class SRead:
    label: str
    dest: str
    loc: str


@dataclass
class SWrite:
    label: str
    loc: str
    value: int


@dataclass
class SLocal:
    label: str
    dest: str
    src: Union[int, str]  # int constant or source local


@dataclass
class SRmw:
    label: str
    dest: str
    loc: str
    value: int


@dataclass
class SFence:
    label: str


@dataclass
class SIf:
    branch_id: str
    guard: Guard
    then_body: list
    else_body: list


Stmt = Union[SRead, SWrite, SLocal, SRmw, SFence, SIf]


@dataclass(frozen=True)
class PredAtom:
    kind: str  # local / final
    name: str
    value: int

    def render(self) -> str:
        if self.kind == "final":
            return f"{self.name}@final = {self.value}"
        return f"{self.name} = {self.value}"


@dataclass(frozen=True)
class Predicate:
    quantifier: str  # exists / forbidden
    atoms: tuple

    def render(self) -> str:
        body = " /\\ ".join(a.render() for a in self.atoms)
        return f"{self.quantifier}({body})"


@dataclass
class LitmusCase:
    init: list  # ordered (loc, value) pairs
    threads: dict  # tid -> list[Stmt]
    final_locs: list
    predicate: Optional[Predicate]


@dataclass
class AbstractProgram:
    """Parsed program: per-thread statement trees plus event metadata."""

    locations: dict  # loc -> init value, declaration order preserved
    threads: dict  # tid -> list[Stmt]
    init_events: list  # Event per declared location
    events: dict  # label -> Event, every event in any branch arm
    guards: dict  # branch id -> Guard
    final_locs: list = field(default_factory=list)
    predicate: Optional[Predicate] = None

    def thread_ids(self):
        return sorted(self.threads)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<conj>/\\)
  | (?P<eqeq>==)
  | (?P<neq>!=)
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>[{}();:,=@.])
    """,
    re.VERBOSE,
)

LOOP_WORDS = {"while", "for", "do", "loop", "goto", "repeat"}


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str):
    toks = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            raise LitmusError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ws":
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = m.start() + chunk.rfind("\n") + 1
        elif kind == "comment":
            pass  # runs to end of line, so no line tracking needed
        else:
            col = m.start() - line_start + 1
            if kind == "sym":
                kind = chunk
            elif kind in ("eqeq", "neq", "conj"):
                kind = chunk
            toks.append(Tok(kind, chunk, line, col))
        pos = m.end()
    toks.append(Tok("eof", "", line, len(text) - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0

    def peek(self, ahead=0) -> Tok:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind, what=None) -> Tok:
        t = self.peek()
        if t.kind != kind:
            want = what or kind
            raise LitmusError(f"expected {want}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def expect_kw(self, word) -> Tok:
        t = self.peek()
        if t.kind != "ident" or t.text != word:
            raise LitmusError(f"expected {word!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def parse_case(self) -> LitmusCase:
        init = self.parse_init()
        threads = {}
        while self.peek().kind == "ident" and self.peek().text == "thread":
            tid, body = self.parse_thread()
            if tid in threads:
                t = self.peek()
                raise LitmusError(f"thread {tid} defined twice", t.line, t.col)
            threads[tid] = body
        if not threads:
            t = self.peek()
            raise LitmusError("expected at least one thread block", t.line, t.col)
        final_locs = []
        if self.peek().kind == "ident" and self.peek().text == "final":
            final_locs = self.parse_final()
        predicate = None
        if self.peek().kind == "ident" and self.peek().text in ("exists", "forbidden"):
            predicate = self.parse_assert()
        t = self.peek()
        if t.kind != "eof":
            raise LitmusError(f"unexpected trailing input {t.text!r}", t.line, t.col)
        return LitmusCase(init, threads, final_locs, predicate)

    def parse_init(self) -> list:
        self.expect_kw("init")
        self.expect("{")
        out = []
        seen = set()
        while self.peek().kind == "ident":
            loc = self.next()
            self.expect("=")
            val = self.expect("int", "an integer initial value")
            self.expect(";")
            if loc.text in seen:
                raise LitmusError(f"location {loc.text} initialized twice", loc.line, loc.col)
            seen.add(loc.text)
            out.append((loc.text, int(val.text)))
        self.expect("}")
        return out

    def parse_thread(self):
        self.expect_kw("thread")
        tid_tok = self.expect("int", "a thread number")
        tid = int(tid_tok.text)
        if tid <= 0:
            raise LitmusError(
                "thread numbers start at 1 (0 is reserved for initialization)",
                tid_tok.line,
                tid_tok.col,
            )
        self.expect("{")
        body = self.parse_stmts()
        self.expect("}")
        return tid, body

    def parse_stmts(self) -> list:
        out = []
        while True:
            t = self.peek()
            if t.kind in ("}", "eof"):
                return out
            out.append(self.parse_stmt())

    def parse_stmt(self) -> Stmt:
        label = None
        t = self.peek()
        if t.kind == "ident" and self.peek(1).kind == ":":
            label = self.next().text
            self.next()
            t = self.peek()
        if t.kind == "ident" and t.text in LOOP_WORDS:
            raise LitmusError(
                f"loop construct {t.text!r} is not supported; unroll loops finitely",
                t.line,
                t.col,
            )
        if t.kind == "ident" and t.text == "if":
            return self.parse_if(label)
        stmt = self.parse_simple(label)
        self.expect(";")
        return stmt

    def parse_simple(self, label) -> Stmt:
        t = self.peek()
        if t.kind != "ident":
            raise LitmusError(f"expected a statement, found {t.text!r}", t.line, t.col)
        if t.text == "rmw":
            self.next()
            self.expect("(")
            dest = self.expect("ident", "a local name")
            self.expect(",")
            loc = self.expect("ident", "a location name")
            self.expect(",")
            val = self.expect("int", "an integer value")
            self.expect(")")
            return SRmw(label, dest.text, loc.text, int(val.text))
        if t.text == "fence" and self.peek(1).kind == ".":
            self.next()
            self.next()
            suffix = self.expect("ident", "a fence kind")
            if suffix.text != "rr":
                raise LitmusError(f"unknown fence kind {suffix.text!r}", suffix.line, suffix.col)
            return SFence(label)
        lhs = self.next()
        self.expect("=")
        rhs = self.peek()
        if rhs.kind == "int":
            self.next()
            return SWrite(label, lhs.text, int(rhs.text))  # reclassified later
        if rhs.kind == "ident":
            self.next()
            return SRead(label, lhs.text, rhs.text)  # reclassified later
        raise LitmusError(
            f"expected an integer or a name after '=', found {rhs.text!r}", rhs.line, rhs.col
        )

    def parse_if(self, label) -> SIf:
        t = self.expect_kw("if")
        if label is not None:
            raise LitmusError("labels attach to simple statements, not branches", t.line, t.col)
        self.expect("(")
        guard = self.parse_cond()
        self.expect(")")
        self.expect("{")
        then_body = self.parse_stmts()
        self.expect("}")
        else_body = []
        if self.peek().kind == "ident" and self.peek().text == "else":
            self.next()
            self.expect("{")
            else_body = self.parse_stmts()
            self.expect("}")
        return SIf(None, guard, then_body, else_body)

    def parse_cond(self) -> Guard:
        t = self.expect("ident", "a condition")
        if t.text == "true":
            return Guard("true")
        if t.text == "false":
            return Guard("false")
        op = self.peek()
        if op.kind == "==":
            self.next()
            val = self.expect("int", "an integer")
            return Guard("eq", t.text, int(val.text))
        if op.kind == "!=":
            self.next()
            val = self.expect("int", "an integer")
            return Guard("ne", t.text, int(val.text))
        raise LitmusError(f"expected '==' or '!=' after {t.text!r}", op.line, op.col)

    def parse_final(self) -> list:
        self.expect_kw("final")
        self.expect("{")
        out = []
        while self.peek().kind == "ident":
            loc = self.next()
            self.expect(";")
            if loc.text in out:
                raise LitmusError(f"location {loc.text} listed twice in final", loc.line, loc.col)
            out.append(loc.text)
        self.expect("}")
        return out

    def parse_assert(self) -> Predicate:
        quant = self.next().text
        self.expect("(")
        atoms = [self.parse_atom()]
        while self.peek().kind == "/\\":
            self.next()
            atoms.append(self.parse_atom())
        self.expect(")")
        return Predicate(quant, tuple(atoms))

    def parse_atom(self) -> PredAtom:
        name = self.expect("ident", "a local or location name")
        if self.peek().kind == "@":
            self.next()
            self.expect_kw("final")
            self.expect("=")
            val = self.expect("int", "an integer")
            return PredAtom("final", name.text, int(val.text))
        self.expect("=")
        val = self.expect("int", "an integer")
        return PredAtom("local", name.text, int(val.text))


def parse_litmus(text: str) -> LitmusCase:
    """Parse litmus source text.  Raises LitmusError with line/column."""
    return _Parser(text).parse_case()


# ---------------------------------------------------------------------------
# Abstract-program construction
# ---------------------------------------------------------------------------


def build_abstract_program(case: LitmusCase) -> AbstractProgram:
    locations = dict(case.init)
    events = {}
    guards = {}
    labels_seen = set()
    counter = {"stmt": 0, "branch": 0}

    def fresh_stmt_label():
        counter["stmt"] += 1
        return f"A{counter['stmt']}"

    def fresh_branch_id():
        counter["branch"] += 1
        return f"C{counter['branch']}"

    def register(label, event=None):
        if label in labels_seen:
            raise LitmusError(f"duplicate label {label!r}")
        labels_seen.add(label)
        if event is not None:
            events[label] = event

    def visit(stmts, tid):
        for i, st in enumerate(stmts):
            if isinstance(st, SIf):
                st.branch_id = fresh_branch_id()
                guards[st.branch_id] = st.guard
                visit(st.then_body, tid)
                visit(st.else_body, tid)
                continue
            if st.label is None:
                st.label = fresh_stmt_label()
            else:
                counter["stmt"] += 1  # keep auto numbering positional
            if isinstance(st, SWrite):
                # reclassify: undeclared left side means a local constant
                if st.loc in locations:
                    register(st.label, Event(st.label, tid, WRITE, st.loc, st.value))
                else:
                    stmts[i] = SLocal(st.label, st.loc, st.value)
                    register(st.label)
            elif isinstance(st, SRead):
                if st.dest in locations:
                    raise LitmusError(
                        f"{st.dest} is a declared location; writes take integer values"
                    )
                # reclassify: declared right side is a shared read
                if st.loc in locations:
                    register(st.label, Event(st.label, tid, READ, st.loc, None, st.dest))
                else:
                    stmts[i] = SLocal(st.label, st.dest, st.loc)
                    register(st.label)
            elif isinstance(st, SRmw):
                if st.loc not in locations:
                    raise LitmusError(f"rmw reads undeclared location {st.loc!r}")
                register(st.label, Event(st.label, tid, RMW, st.loc, st.value, st.dest))
            elif isinstance(st, SFence):
                register(st.label, Event(st.label, tid, FENCE_RR, None))
            elif isinstance(st, SLocal):
                register(st.label)
            else:
                raise LitmusError(f"unhandled statement {st!r}")

    for tid in sorted(case.threads):
        visit(case.threads[tid], tid)

    init_events = []
    for loc, value in case.init:
        label = f"I_{loc}"
        if label in labels_seen:
            raise LitmusError(f"label {label!r} collides with an initialization label")
        init_events.append(Event(label, INIT_TID, WRITE, loc, value))
        events[label] = init_events[-1]

    for loc in case.final_locs:
        if loc not in locations:
            raise LitmusError(f"final clause reads undeclared location {loc!r}")

    if case.predicate:
        for atom in case.predicate.atoms:
            if atom.kind == "final":
                if atom.name not in locations:
                    raise LitmusError(
                        f"predicate reads undeclared location {atom.name!r}"
                    )
                if atom.name not in case.final_locs:
                    raise LitmusError(
                        f"predicate uses {atom.name}@final but {atom.name} is not in the final clause"
                    )
            elif atom.name in locations:
                raise LitmusError(
                    f"predicate atom {atom.name} = {atom.value} names a location; "
                    f"use {atom.name}@final for memory"
                )

    return AbstractProgram(
        locations=locations,
        threads=case.threads,
        init_events=init_events,
        events=events,
        guards=guards,
        final_locs=list(case.final_locs),
        predicate=case.predicate,
    )


def load_program(text: str) -> AbstractProgram:
    return build_abstract_program(parse_litmus(text))


def final_read_event(loc: str) -> Event:
    return Event(f"F_{loc}", FINAL_TID, READ, loc, None, f"{loc}@final")


# ---------------------------------------------------------------------------
# Pretty printing
# ---------------------------------------------------------------------------


def pretty_print(prog: AbstractProgram) -> str:
    """Render a built program back to litmus text.  Labels come out
    explicit, so reparsing yields an identical program."""
    lines = ["init {"]
    for loc, val in prog.locations.items():
        lines.append(f"  {loc} = {val};")
    lines.append("}")
    for tid in sorted(prog.threads):
        lines.append(f"thread {tid} {{")
        lines.extend(_pp_stmts(prog.threads[tid], 1))
        lines.append("}")
    if prog.final_locs:
        lines.append("final { " + " ".join(f"{loc};" for loc in prog.final_locs) + " }")
    if prog.predicate:
        lines.append(prog.predicate.render())
    return "\n".join(lines) + "\n"


def _pp_stmts(stmts, depth) -> list:
    pad = "  " * depth
    out = []
    for st in stmts:
        prefix = f"{st.label}: " if getattr(st, "label", None) else ""
        if isinstance(st, SIf):
            out.append(f"{pad}if ({st.guard.render()}) {{")
            out.extend(_pp_stmts(st.then_body, depth + 1))
            if st.else_body:
                out.append(f"{pad}}} else {{")
                out.extend(_pp_stmts(st.else_body, depth + 1))
            out.append(f"{pad}}}")
        elif isinstance(st, SWrite):
            out.append(f"{pad}{prefix}{st.loc} = {st.value};")
        elif isinstance(st, SRead):
            out.append(f"{pad}{prefix}{st.dest} = {st.loc};")
        elif isinstance(st, SLocal):
            out.append(f"{pad}{prefix}{st.dest} = {st.src};")
        elif isinstance(st, SRmw):
            out.append(f"{pad}{prefix}rmw({st.dest}, {st.loc}, {st.value});")
        elif isinstance(st, SFence):
            out.append(f"{pad}{prefix}fence.rr;")
    return out
