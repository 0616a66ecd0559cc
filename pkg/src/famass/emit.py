"""Diagram text and canonical dumps for the three deployment stages.

Diagrams are Graphviz DOT (class and package diagrams) or a small line
format (activity and protocol diagrams). Stereotypes are label prefixes
such as ``«tactical»`` so the output stays renderer-agnostic.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from famass.analysis import AbilityDecl
from famass.codec import canonical_json, from_tree, to_tree
from famass.deploy import (
    AgentKind,
    ConceptualAgentModel,
    Deployment,
    DomainModel,
    OperationalAgentModel,
)

DUMP_FORMAT = "famass-dump"
DUMP_VERSION = 1

STAGES = {"dm": DomainModel, "cam": ConceptualAgentModel, "oam": OperationalAgentModel}


@dataclass(frozen=True)
class Artifact:
    kind: str  # class_diagram | class_table | package_diagram | activity_diagram | protocol_diagram | structured_dump
    target: str  # dm | cam | oam
    body: str
    subject: str = ""


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _label(lines: Iterable[str]) -> str:
    return _q("\n".join(lines)).replace("\n", "\\n")


def _header(name: str, extra: Iterable[str] = ()) -> list[str]:
    lines = [f"digraph {_q(name)} {{", "  graph [rankdir=LR];"]
    lines += [f"  {e}" for e in extra]
    lines.append("  node [shape=box];")
    return lines


# -- Domain Model -------------------------------------------------------------


def _stock_text(inv) -> str:
    text = f"{inv.stock_kind.value}={inv.initial_qty}"
    opts = []
    if inv.reorder_point is not None:
        opts.append(f"rp={inv.reorder_point}")
    if inv.reorder_qty is not None:
        opts.append(f"rq={inv.reorder_qty}")
    if opts:
        text += "(" + ",".join(opts) + ")"
    return text


def emit_class_artifacts(dm: DomainModel) -> list[Artifact]:
    """Class diagram (blocks as classes, flows as arrows) and the companion class table."""
    units = {u.id: u for u in dm.structural.units}
    dp = dm.dynamic.decoupling_point
    stocks: dict[str, list] = {}
    for inv in dm.dynamic.inventories:
        stocks.setdefault(inv.block, []).append(inv)

    lines = _header("dm")
    for b in dm.structural.blocks:
        title = f"{b.id} <DP>" if b.id == dp else b.id
        role = units[b.unit].role.value if b.unit in units else "?"
        label = [f"«{b.level.value}»", title, f"role: {role}"]
        label += [f"+{fn.value}()" for fn in b.functions]
        label += [f"+{r}()" for r in b.responsibilities]
        label += [f"+hold_{inv.stock_kind.value}()" for inv in stocks.get(b.id, [])]
        lines.append(f"  {_q(b.id)} [label={_label(label)}];")
    for link in dm.structural.physical_links:
        lines.append(f"  {_q(link.source)} -> {_q(link.target)} [style=solid, label={_q(link.product)}];")
    for link in dm.dynamic.info_links:
        lines.append(
            f"  {_q(link.source)} -> {_q(link.target)} [style=dashed, label={_q(link.info_type.value)}];"
        )
    lines.append("}")
    diagram = Artifact("class_diagram", "dm", "\n".join(lines) + "\n")

    flows: dict[str, list[str]] = {}
    for link in dm.structural.physical_links:
        flows.setdefault(link.source, []).append(f"{link.product}=>{link.target}")
    for link in dm.dynamic.info_links:
        flows.setdefault(link.source, []).append(f"{link.info_type.value}->{link.target}")
    rows = ["class\trole\tlevel\tfunctions\tresponsibilities\tstock\tflows\tdecoupling"]
    for b in dm.structural.blocks:
        role = units[b.unit].role.value if b.unit in units else "?"
        rows.append(
            "\t".join(
                [
                    f"{b.id} <DP>" if b.id == dp else b.id,
                    role,
                    b.level.value,
                    ",".join(fn.value for fn in b.functions),
                    ",".join(b.responsibilities),
                    ";".join(_stock_text(inv) for inv in stocks.get(b.id, [])),
                    ";".join(flows.get(b.id, [])),
                    "yes" if b.id == dp else "",
                ]
            )
        )
    table = Artifact("class_table", "dm", "\n".join(rows) + "\n")
    return [diagram, table]


# -- Conceptual Agent Model -----------------------------------------------------


def _agent_node(a, indent: str) -> str:
    if a.kind is AgentKind.MEDIATOR:
        label = ["«mediator»", a.name, "scope: " + ", ".join(a.scope)]
    else:
        label = [f"«{a.kind.value} activity-agent»", a.name]
        if a.level is not None:
            label.append(f"level: {a.level.value}")
        if a.specialization:
            label.append(f"specialization: {a.specialization}")
        label.append("origin: " + ", ".join(a.origin))
    return f"{indent}{_q(a.name)} [label={_label(label)}];"


def emit_package_diagram(cam: ConceptualAgentModel) -> Artifact:
    """Actor-agents as packages around their activity-agents; products boxed on physical links."""
    extra = []
    if cam.social_structure is not None:
        extra.append(f"label={_q('structure: ' + cam.social_structure.value)};")
    lines = _header("cam", extra)
    agents = {a.name: a for a in cam.activity_agents}
    packaged: set[str] = set()
    for actor in cam.actor_agents:
        lines.append(f"  subgraph {_q('cluster_' + actor.name)} {{")
        lines.append(f"    label={_q(f'«actor-agent» {actor.name} ({actor.role.value})')};")
        for m in actor.members:
            lines.append(_agent_node(agents[m], "    "))
            packaged.add(m)
        lines.append("  }")
    for a in cam.activity_agents:
        if a.name not in packaged:
            lines.append(_agent_node(a, "  "))
    for it in cam.physical_interactions:
        lines.append(f"  {_q(it.source)} -> {_q(it.target)} [style=solid, label={_q(f'[{it.product}]')}];")
    for it in cam.informational_interactions:
        lines.append(
            f"  {_q(it.source)} -> {_q(it.target)} [style=dashed, label={_q(it.info_type.value)}];"
        )
    lines.append("}")
    return Artifact("package_diagram", "cam", "\n".join(lines) + "\n")


# -- Operational Agent Model ------------------------------------------------------


def _ability_text(a: AbilityDecl) -> str:
    if not a.params:
        return a.kind.value
    return f"{a.kind.value}(" + ", ".join(f"{k}={v}" for k, v in a.params) + ")"


def emit_activity(agent) -> Artifact:
    lines = [f"activity {agent.name}", f"society {agent.society}"]
    if agent.knowledge:
        lines.append("knowledge " + ", ".join(agent.knowledge))
    abilities = {a.kind: a for a in agent.abilities}
    for st in agent.behavior.states:
        if st.passive:
            flags = "passive, initial" if st.initial else "passive"
            lines.append(f"state {st.name} [{flags}]")
        else:
            lines.append(f"state {st.name} [active, {st.action}] do {_ability_text(abilities[st.ability])}")
    for tr in agent.behavior.transitions:
        lines.append(f"transition {tr.source} -> {tr.target} on {tr.event} {_q(tr.trigger)}")
    return Artifact("activity_diagram", "oam", "\n".join(lines) + "\n", agent.name)


def emit_protocol(spec) -> Artifact:
    lines = [f"protocol {spec.name} [{spec.type.value}]"]
    lines.append("lifeline initiator: " + ", ".join(spec.initiators))
    lines.append("lifeline responder: " + ", ".join(spec.responders))
    if spec.arbiter:
        lines.append(f"lifeline arbiter: {spec.arbiter}")
    for src, dst, ty in spec.bindings:
        lines.append(f"binding {src} -> {dst} ({ty.value})")
    for step in spec.sequence:
        lines.append(f"{step.step} {step.sender} -> {step.receiver}: {step.performative}")
    return Artifact("protocol_diagram", "oam", "\n".join(lines) + "\n", spec.name)


def emit_behavior_and_protocols(oam: OperationalAgentModel) -> list[Artifact]:
    """One activity artifact per agent, then one protocol artifact per protocol."""
    out = [emit_activity(a) for a in oam.agents]
    out += [emit_protocol(p) for p in oam.protocols]
    return out


def emit_society_diagram(oam: OperationalAgentModel) -> Artifact:
    """Decision and execution societies with responsibility links between them."""
    lines = _header("oam")
    for society, members in (("decision", oam.decision_society), ("execution", oam.execution_society)):
        lines.append(f"  subgraph {_q('cluster_' + society)} {{")
        lines.append(f"    label={_q(f'«{society} society»')};")
        for a in members:
            lines.append(f"    {_q(a.name)};")
        lines.append("  }")
    for d, e in oam.responsibility_links:
        lines.append(f"  {_q(d)} -> {_q(e)} [style=bold, label=\"responsible\"];")
    for it in oam.physical_interactions:
        lines.append(f"  {_q(it.source)} -> {_q(it.target)} [style=solid, label={_q(f'[{it.product}]')}];")
    for p in oam.protocols:
        for src, dst, _ in p.bindings:
            lines.append(f"  {_q(src)} -> {_q(dst)} [style=dashed, label={_q(p.name)}];")
    for x in oam.inform_exchanges:
        lines.append(f"  {_q(x.source)} -> {_q(x.target)} [style=dotted, label=\"inform\"];")
    lines.append("}")
    return Artifact("package_diagram", "oam", "\n".join(lines) + "\n")


# -- dumps -----------------------------------------------------------------------

StageModel = Union[DomainModel, ConceptualAgentModel, OperationalAgentModel]


def stage_of(obj: StageModel) -> str:
    for name, cls in STAGES.items():
        if isinstance(obj, cls):
            return name
    raise TypeError(f"not a stage model: {type(obj).__name__}")


def dump(obj: StageModel, model: str = "model") -> str:
    """Canonical dump: sorted-key JSON, two-space indent, UTF-8, trailing LF."""
    stage = stage_of(obj)
    tree = {"format": DUMP_FORMAT, "version": DUMP_VERSION, "stage": stage, "model": model, "body": to_tree(obj)}
    return canonical_json(tree)


def dump_artifact(obj: StageModel, model: str = "model") -> Artifact:
    return Artifact("structured_dump", stage_of(obj), dump(obj, model))


class DumpError(ValueError):
    pass


def load(text: str) -> tuple[str, str, StageModel]:
    """Parse a dump; returns ``(stage, model name, stage model)``."""
    import json

    try:
        tree = json.loads(text)
    except json.JSONDecodeError as e:
        raise DumpError(f"not a dump: {e}") from None
    if not isinstance(tree, dict) or tree.get("format") != DUMP_FORMAT:
        raise DumpError("not a famass dump")
    if tree.get("version") != DUMP_VERSION:
        raise DumpError(f"unsupported dump version {tree.get('version')!r}")
    stage = tree.get("stage")
    if stage not in STAGES:
        raise DumpError(f"unknown stage {stage!r}")
    try:
        obj = from_tree(STAGES[stage], tree["body"])
    except (KeyError, TypeError, ValueError) as e:
        raise DumpError(f"malformed {stage} dump: {e}") from None
    return stage, tree.get("model", "model"), obj


# -- files ------------------------------------------------------------------------


def stage_artifacts(obj: StageModel) -> list[Artifact]:
    stage = stage_of(obj)
    if stage == "dm":
        return emit_class_artifacts(obj)
    if stage == "cam":
        return [emit_package_diagram(obj)]
    return [emit_society_diagram(obj)] + emit_behavior_and_protocols(obj)


def render_files(obj: StageModel, model: str) -> dict[str, str]:
    """File name -> contents for one stage.

    Artifacts sharing a kind are concatenated (blank-line separated, in
    artifact order) into ``<model>.<stage>.<kind>.txt``.
    """
    stage = stage_of(obj)
    grouped: dict[str, list[str]] = {}
    for art in stage_artifacts(obj):
        grouped.setdefault(art.kind, []).append(art.body)
    files = {f"{model}.{stage}.{kind}.txt": "\n".join(bodies) for kind, bodies in grouped.items()}
    files[f"{model}.{stage}.dump"] = dump(obj, model)
    return dict(sorted(files.items()))


def deployment_files(dep: Deployment, model: str) -> dict[str, str]:
    files: dict[str, str] = {}
    for obj in (dep.dm, dep.cam, dep.oam):
        files.update(render_files(obj, model))
    return dict(sorted(files.items()))


def write_files(out_dir, files: dict[str, str]) -> None:
    """Write all files or none.

    Everything is staged in a sibling temporary directory first. A missing
    ``out_dir`` is created by renaming the staging directory; otherwise each
    file is moved in with an atomic replace.
    """
    out = Path(out_dir)
    parent = out.parent if str(out.parent) else Path(".")
    parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=parent))
    try:
        for name, text in files.items():
            with open(staging / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        if not out.exists():
            os.rename(staging, out)
            return
        for name in files:
            os.replace(staging / name, out / name)
    finally:
        if staging.exists():
            for p in staging.iterdir():
                p.unlink()
            staging.rmdir()
