"""Machine-readable report rendering.

JSON payloads are emitted with sorted keys and stable list orders, so
the same input and configuration produce byte-identical output.  Dot
export writes one digraph per execution with nodes in program order
and edges labeled po, rf, mo, rb.
"""
import json

from .execution import Execution, derived_relations, outcome_of
from .litmus import FINAL_TID
from .relalg import label_key


def _pair_key(pair):
    return (label_key(pair[0]), label_key(pair[1]))


def sorted_pairs(rel) -> list:
    return [list(p) for p in sorted(rel.pairs(), key=_pair_key)]


def event_text(ev) -> str:
    if ev.kind == "W":
        return f"{ev.label}: W {ev.loc}={ev.value}"
    if ev.kind == "R":
        tag = "@final" if ev.tid == FINAL_TID else ""
        dest = f" -> {ev.dest}" if ev.dest else ""
        return f"{ev.label}: R {ev.loc}{tag}{dest}"
    if ev.kind == "U":
        return f"{ev.label}: U {ev.loc}={ev.value} -> {ev.dest}"
    return f"{ev.label}: fence.rr"


def event_dict(ev) -> dict:
    return {
        "label": ev.label,
        "tid": ev.tid,
        "kind": ev.kind,
        "loc": ev.loc,
        "value": ev.value,
        "dest": ev.dest,
    }


def topological_labels(events, po) -> list:
    # po is transitively closed, so predecessor count sorts topologically
    labels = [e.label for e in events]
    npred = {b: sum(1 for a in labels if (a, b) in po) for b in labels}
    return sorted(labels, key=lambda l: (npred[l], label_key(l)))


def pretrace_dict(p) -> dict:
    return {
        "events": [event_dict(e) for e in p.events],
        "po": sorted_pairs(p.po_display()),
        "choices": {c.branch_id: c.taken for c in p.choices},
    }


def mo_chain(e: Execution) -> list:
    writes = [ev.label for ev in e.writes()]
    return sorted(
        writes,
        key=lambda w: (
            sum(1 for v in writes if (v, w) in e.mo),
            label_key(w),
        ),
    )


def execution_dict(e: Execution) -> dict:
    return {
        "events": [event_dict(ev) for ev in e.pretrace.events],
        "po": sorted_pairs(e.pretrace.po_display()),
        "rf": {r: w for r, w in sorted(e.rf.items(), key=lambda p: label_key(p[0]))},
        "mo": mo_chain(e),
        "outcome": outcome_of(e).render(),
    }


def verdict_dict(v) -> dict:
    return {
        "verdict": "consistent" if v.consistent else "inconsistent",
        "violations": [
            {"rule": rule, "cycle": list(path)} for rule, path in v.violations
        ],
    }


def safety_dict(rep) -> dict:
    return {
        "verdict": "safe" if rep.safe else "unsafe",
        "checked_pairs": rep.checked_pairs,
        "note": rep.note,
        "witness": None if rep.witness is None else execution_dict(rep.witness),
        "witness_partners": [
            execution_dict(d) for d in rep.witness_partners
        ],
    }


def _jsonable(value):
    if isinstance(value, Execution):
        return execution_dict(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (frozenset, set)):
        return sorted(value, key=str)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def meta_dict(v) -> dict:
    return {
        "property": v.property,
        "verdict": "holds" if v.holds else "fails",
        "search_bound": v.search_bound,
        "counterexamples": [_jsonable(cx) for cx in v.counterexamples],
        "details": _jsonable(v.details),
    }


def to_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Dot export
# ---------------------------------------------------------------------------

_EDGE_STYLES = {
    "po": "",
    "rf": ", style=dashed",
    "mo": ", color=gray40",
    "rb": ", style=dotted, color=red3",
}


def _dot_one(e: Execution, name: str, title: str) -> list:
    env = derived_relations(e)
    lines = [f"digraph {name} {{", "  rankdir=TB;", f'  label="{title}";']
    for lab in topological_labels(e.pretrace.events, e.pretrace.po):
        text = event_text(e.pretrace.event(lab))
        lines.append(f'  "{lab}" [shape=box, label="{text}"];')
    chain = mo_chain(e)
    edges = {
        "po": sorted_pairs(e.pretrace.po_display()),
        "rf": sorted(
            ([w, r] for r, w in e.rf.items()), key=_pair_key
        ),
        "mo": [list(p) for p in zip(chain, chain[1:])],
        "rb": sorted_pairs(env.relation("rb")),
    }
    for rel, pairs in edges.items():
        style = _EDGE_STYLES[rel]
        for a, b in pairs:
            lines.append(f'  "{a}" -> "{b}" [label="{rel}"{style}];')
    lines.append("}")
    return lines


def dot_export(executions, titles=None) -> str:
    """One digraph per execution; titles default to the outcomes."""
    blocks = []
    for i, e in enumerate(executions):
        title = (
            titles[i] if titles is not None else outcome_of(e).render()
        )
        blocks.extend(_dot_one(e, f"exec{i}", title))
    return "\n".join(blocks) + "\n"


def dot_export_pretraces(pretraces) -> str:
    """Program-order graphs only, one per pre-trace."""
    lines = []
    for i, p in enumerate(pretraces):
        lines.append(f"digraph pretrace{i} {{")
        lines.append("  rankdir=TB;")
        lines.append(f'  label="{p.describe()}";')
        for lab in topological_labels(p.events, p.po):
            text = event_text(p.event(lab))
            lines.append(f'  "{lab}" [shape=box, label="{text}"];')
        for a, b in sorted_pairs(p.po_display()):
            lines.append(f'  "{a}" -> "{b}" [label="po"];')
        lines.append("}")
    return "\n".join(lines) + "\n"
