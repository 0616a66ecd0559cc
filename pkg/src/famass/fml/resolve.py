"""Whole-model validation: cube consistency, FML cross references, deployability."""

from __future__ import annotations

from famass.analysis import (
    AbilityKind,
    AnalysisModel,
    Distribution,
    Merge,
    Split,
)
from famass.metamodel import ValidationReport, Violation, validate_cube


def _at(model: AnalysisModel, kind: str, key) -> tuple[int, int]:
    if model.source is None:
        return (0, 0)
    return model.source.at(kind, str(key))


def _v(model, code, message, subject, kind, key) -> Violation:
    line, col = _at(model, kind, key)
    return Violation(code, message, subject, line, col)


def resolve(model: AnalysisModel) -> ValidationReport:
    """Return every reason ``model`` cannot be deployed; empty means deployable.

    Structural checks run first. Only when they pass is the deployment
    pipeline attempted, and any stage failure is reported as a violation,
    so a clean report guarantees that all three stages succeed.
    """
    report = ValidationReport()
    dpa, saoa, iaoa = model.dpa, model.saoa, model.iaoa

    for v in validate_cube(dpa.blocks, dpa.units):
        line, col = _at(model, "block", v.subject)
        if v.code == "dangling-reference":
            line, col = _at(model, "block", _block_of_unit_ref(dpa.blocks, v.subject))
        report.violations.append(Violation(v.code, v.message, v.subject, line, col))

    blocks = {b.id: b for b in dpa.blocks}
    products = {p.id for p in dpa.products}
    for i, rel in enumerate(dpa.relations):
        ends = [e for e in (rel.source, rel.target) if e not in blocks]
        for e in ends:
            report.violations.append(
                _v(model, "dangling-reference", f"relation endpoint {e!r} is not a block", e, "relation", i)
            )
        if rel.product is not None and rel.product not in products:
            report.violations.append(
                _v(model, "dangling-reference", f"undeclared product {rel.product!r}", rel.product, "relation", i)
            )
        if rel.is_physical:
            if rel.info_type is not None:
                report.violations.append(
                    _v(model, "info-type", "physical relation must not carry a flow type", rel.source, "relation", i)
                )
            if rel.product is None:
                report.violations.append(
                    _v(model, "physical-product", "physical relation must carry a product", rel.source, "relation", i)
                )
            if not ends and not (blocks[rel.source].is_execution and blocks[rel.target].is_execution):
                report.violations.append(
                    _v(
                        model,
                        "physical-level",
                        f"physical relation requires execution level ({rel.source} -> {rel.target})",
                        rel.source,
                        "relation",
                        i,
                    )
                )
        elif rel.info_type is None:
            report.violations.append(
                _v(model, "info-type", "informational relation needs a flow type", rel.source, "relation", i)
            )

    if dpa.decoupling_point is not None and dpa.decoupling_point not in blocks:
        report.violations.append(
            _v(model, "dangling-reference", f"undeclared block {dpa.decoupling_point!r}", dpa.decoupling_point, "decoupling", "")
        )
    for i, inv in enumerate(dpa.inventories):
        if inv.block not in blocks:
            report.violations.append(
                _v(model, "dangling-reference", f"undeclared block {inv.block!r}", inv.block, "inventory", i)
            )
        if inv.initial_qty < 0 or (inv.reorder_point is not None and inv.reorder_point < 0):
            report.violations.append(
                _v(model, "quantity-range", "inventory quantities must be non-negative", inv.block, "inventory", i)
            )
        if inv.reorder_qty is not None and inv.reorder_qty <= 0:
            report.violations.append(
                _v(model, "quantity-range", "reorder quantity must be positive", inv.block, "inventory", i)
            )

    claimed: dict[str, int] = {}
    for i, dv in enumerate(saoa.directives):
        targets = dv.blocks if isinstance(dv, Merge) else (dv.block,) if isinstance(dv, Split) else ()
        for bid in targets:
            if bid not in blocks:
                report.violations.append(
                    _v(model, "dangling-reference", f"undeclared block {bid!r}", bid, "directive", i)
                )
            elif bid in claimed:
                report.violations.append(
                    _v(
                        model,
                        "directive-overlap",
                        f"block {bid!r} appears in more than one merge/split directive",
                        bid,
                        "directive",
                        i,
                    )
                )
            claimed.setdefault(bid, i)

    for p in saoa.protocols:
        if not p.binding:
            report.violations.append(
                _v(model, "protocol-unbound", f"protocol {p.name!r} binds no informational relation", p.name, "protocol", p.name)
            )

    uncertainties = {u.name for u in model.gpa.uncertainties}
    for i, ab in enumerate(iaoa.abilities):
        msg = _param_problem(ab, uncertainties)
        if msg:
            report.violations.append(_v(model, "ability-param", msg, ab.selector, "ability", i))

    if report.violations:
        return _ordered(report)

    from famass.deploy import DeployError, deploy

    try:
        deploy(model)
    except DeployError as e:
        report.violations.append(Violation(e.code, e.message, e.subject, *_locate(model, e)))
    return _ordered(report)


def _param_problem(ab, uncertainties) -> str:
    kind = ab.kind
    if kind is AbilityKind.SHIP:
        lt = ab.param("lead_time", 1)
        if not isinstance(lt, int) or lt < 1:
            return "ship lead_time must be an integer >= 1"
        price = ab.param("price", 0)
        if not isinstance(price, (int, float)) or price < 0:
            return "ship price must be a non-negative number"
    elif kind is AbilityKind.PROCURE:
        for name in ("reorder_point", "reorder_qty"):
            v = ab.param(name)
            if v is not None and (not isinstance(v, int) or v < 0):
                return f"procure {name} must be a non-negative integer"
        if ab.param("reorder_qty") == 0:
            return "procure reorder_qty must be positive"
    elif kind is AbilityKind.PLAN_PRODUCTION:
        if ab.param("policy", "lot_for_lot") != "lot_for_lot":
            return "plan_production supports policy=lot_for_lot only"
    elif kind is AbilityKind.DISPATCH:
        if ab.param("rule", "fifo") != "fifo":
            return "dispatch supports rule=fifo only"
        cap = ab.param("capacity")
        if cap is not None and (not isinstance(cap, int) or cap < 1):
            return "dispatch capacity must be an integer >= 1"
    elif kind is AbilityKind.SELL:
        d = ab.param("demand")
        if d is None:
            return "sell needs a demand source"
        if isinstance(d, str) and d not in uncertainties:
            return f"sell demand {d!r} is neither a distribution nor a declared uncertainty"
        if isinstance(d, (int, float)) and d < 0:
            return "sell demand must be non-negative"
        if isinstance(d, Distribution) and d.kind == "none":
            return "sell demand cannot be 'none'"
    return ""


def _block_of_unit_ref(blocks, unit_id) -> str:
    for b in blocks:
        if b.unit == unit_id:
            return b.id
    return ""


def _locate(model: AnalysisModel, err) -> tuple[int, int]:
    if model.source is None:
        return (0, 0)
    for kind in ("block", "protocol"):
        pos = model.source.at(kind, err.subject)
        if pos != (0, 0):
            return pos
    for i, dv in enumerate(model.saoa.directives):
        names = {getattr(dv, "agent", None), getattr(dv, "block", None)}
        names |= set(getattr(dv, "blocks", ()))
        names |= {p.agent for p in getattr(dv, "parts", ())}
        if err.subject in names:
            return model.source.at("directive", str(i))
    for i, ab in enumerate(model.iaoa.abilities):
        if ab.selector == err.subject:
            return model.source.at("ability", str(i))
    for i, r in enumerate(model.iaoa.responses):
        if r.selector == err.subject:
            return model.source.at("rule", str(i))
    return (0, 0)


def _ordered(report: ValidationReport) -> ValidationReport:
    # document order; unlocated violations keep their relative order at the end
    located = [v for v in report.violations if v.line]
    unlocated = [v for v in report.violations if not v.line]
    located.sort(key=lambda v: (v.line, v.col))
    return ValidationReport(located + unlocated)
