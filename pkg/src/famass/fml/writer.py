"""Canonical FML text for an :class:`AnalysisModel`."""

from __future__ import annotations

from famass.analysis import (
    AbilityDecl,
    AnalysisModel,
    Distribution,
    Mediator,
    Merge,
    RelationKind,
    Split,
)
from famass.fml.lexer import IDENT_RE, _number

INDENT = "  "


def _string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _symbol(s: str) -> str:
    # bare only when it lexes back as the same identifier
    if IDENT_RE.fullmatch(s) and _number(s) is None and s != "none":
        return s
    return _string(s)


def _value(v) -> str:
    if isinstance(v, Distribution):
        return str(v)
    if isinstance(v, bool):
        raise TypeError("booleans are not FML values")
    if isinstance(v, (int, float)):
        return repr(v)
    return _symbol(v)


def _list(items) -> str:
    return "[" + ", ".join(items) + "]"


def _ability(a: AbilityDecl) -> str:
    text = f"ability {a.selector} {a.kind.value}"
    if a.params:
        text += "(" + ", ".join(f"{k}={_value(v)}" for k, v in a.params) + ")"
    return text


def serialize(model: AnalysisModel) -> str:
    """Render ``model`` as FML; ``parse_fml(serialize(m)) == m``."""
    out: list[str] = []

    def emit(line: str) -> None:
        out.append(INDENT + line)

    g = model.gpa
    out.append("gpa {")
    if g.objective:
        emit(f"objective {_string(g.objective)}")
    for q in g.questions:
        emit(f"question {_string(q)}")
    for h in g.hypotheses:
        emit(f"hypothesis {_string(h)}")
    for f in g.factors:
        target = f" target {f.target}" if f.target else ""
        emit(f"factor {f.name}{target} levels {_list(_value(v) for v in f.levels)}")
    for u in g.uncertainties:
        emit(f"uncertainty {u.name} {u.distribution}")
    for k in g.kpis:
        emit(f"kpi {k.name} {k.metric.value}")
    out.append("}")

    d = model.dpa
    out.append("dpa {")
    for u in d.units:
        emit(f"unit {u.id} {_string(u.name)} role {u.role.value}")
    for p in d.products:
        emit(f"product {p.id} {_string(p.name)}")
    for b in d.blocks:
        line = (
            f"block {b.id} unit {b.unit} level {b.level.value} "
            f"functions {_list(fn.value for fn in b.functions)}"
        )
        if b.responsibilities:
            line += f" responsibilities {_list(_symbol(r) for r in b.responsibilities)}"
        emit(line)
    for r in d.relations:
        if r.kind is RelationKind.PHYSICAL:
            line = f"relation physical {r.source} -> {r.target} product {r.product}"
        else:
            line = f"relation informational {r.info_type.value} {r.source} -> {r.target}"
            if r.product:
                line += f" product {r.product}"
        if r.key:
            line += f" key {r.key}"
        emit(line)
    if d.decoupling_point:
        emit(f"decoupling {d.decoupling_point}")
    for inv in d.inventories:
        line = f"inventory {inv.block} {inv.stock_kind.value} initial {inv.initial_qty}"
        if inv.reorder_point is not None:
            line += f" reorder_point {inv.reorder_point}"
        if inv.reorder_qty is not None:
            line += f" reorder_qty {inv.reorder_qty}"
        emit(line)
    out.append("}")

    s = model.saoa
    out.append("saoa {")
    if s.social_structure is not None:
        emit(f"structure {s.social_structure.value}")
    for dv in s.directives:
        if isinstance(dv, Merge):
            emit(f"merge {_list(dv.blocks)} -> {dv.agent}")
        elif isinstance(dv, Split):
            parts = (f"{p.agent} {p.specialization.value} {p.key}" for p in dv.parts)
            emit(f"split {dv.block} -> {_list(parts)}")
        elif isinstance(dv, Mediator):
            emit(f"mediator {dv.agent} scope {_list(dv.scope)}")
    for p in s.protocols:
        emit(f"protocol {p.name} {p.type.value} bind {_list(str(sel) for sel in p.binding)}")
    out.append("}")

    i = model.iaoa
    out.append("iaoa {")
    for a in i.abilities:
        emit(_ability(a))
    for r in i.responses:
        emit(f"rule {r.selector} when {r.condition_text()} do {r.action.value}")
    out.append("}")
    return "\n".join(out) + "\n"
