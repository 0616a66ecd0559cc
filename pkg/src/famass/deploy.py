"""Three-stage deployment: DPA -> Domain Model -> Conceptual Agent Model -> Operational Agent Model.

Each stage is a pure function of immutable inputs and sorts every
collection it produces, so equal inputs give equal (and equally ordered)
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from famass.analysis import (
    AbilityDecl,
    AbilityKind,
    AnalysisModel,
    DpaSection,
    GpaSection,
    IaoaSection,
    InfoType,
    InventoryDecl,
    KpiRef,
    Mediator,
    Merge,
    Product,
    ProtocolType,
    ResponseRule,
    SaoaSection,
    SocialStructure,
    Specialization,
    Split,
    StockKind,
    Uncertainty,
)
from famass.metamodel import (
    LEVEL_ORDER,
    DecisionLevel,
    FunctionalArea,
    SpatialRole,
    SpatialUnit,
    SupplyChainBlock,
)

STOCK_ORDER = {k: i for i, k in enumerate(StockKind)}
ABILITY_ORDER = {k: i for i, k in enumerate(AbilityKind)}


class DeployError(Exception):
    def __init__(self, message: str, code: str = "deploy", subject: str = ""):
        super().__init__(message)
        self.message = message
        self.code = code
        self.subject = subject


# -- Domain Model -----------------------------------------------------------


@dataclass(frozen=True)
class PhysicalLink:
    source: str
    target: str
    product: str
    key: Optional[str] = None
    origin: int = 0


@dataclass(frozen=True)
class InfoLink:
    source: str
    target: str
    info_type: InfoType
    product: Optional[str] = None
    key: Optional[str] = None
    origin: int = 0


@dataclass(frozen=True)
class StructuralModel:
    units: tuple[SpatialUnit, ...] = ()
    blocks: tuple[SupplyChainBlock, ...] = ()
    products: tuple[Product, ...] = ()
    physical_links: tuple[PhysicalLink, ...] = ()


@dataclass(frozen=True)
class DynamicModel:
    info_links: tuple[InfoLink, ...] = ()
    decoupling_point: Optional[str] = None
    inventories: tuple[InventoryDecl, ...] = ()


@dataclass(frozen=True)
class DomainModel:
    structural: StructuralModel = StructuralModel()
    dynamic: DynamicModel = DynamicModel()


def _link_key(link) -> tuple:
    extra = link.product if isinstance(link, PhysicalLink) else link.info_type.value
    return (link.source, link.target, extra or "", link.key or "", link.origin)


def _inv_key(inv) -> tuple:
    owner = getattr(inv, "block", None) or getattr(inv, "agent", "")
    return (owner, STOCK_ORDER[inv.stock_kind])


def build_domain_model(dpa: DpaSection) -> DomainModel:
    """Split the DPA relations into a structural (physical) and a dynamic (informational) model."""
    block_ids = {b.id for b in dpa.blocks}
    physical: list[PhysicalLink] = []
    info: list[InfoLink] = []
    for i, rel in enumerate(dpa.relations):
        for end in (rel.source, rel.target):
            if end not in block_ids:
                raise DeployError(f"relation endpoint {end!r} is not a block", "dangling-reference", end)
        if rel.is_physical:
            if rel.product is None:
                raise DeployError(
                    f"physical relation {rel.source} -> {rel.target} carries no product",
                    "physical-product",
                    rel.source,
                )
            physical.append(PhysicalLink(rel.source, rel.target, rel.product, rel.key, i))
        else:
            if rel.info_type is None:
                raise DeployError(
                    f"informational relation {rel.source} -> {rel.target} has no flow type",
                    "info-type",
                    rel.source,
                )
            info.append(InfoLink(rel.source, rel.target, rel.info_type, rel.product, rel.key, i))
    return DomainModel(
        structural=StructuralModel(
            units=tuple(sorted(dpa.units, key=lambda u: u.id)),
            blocks=tuple(sorted(dpa.blocks, key=lambda b: b.id)),
            products=tuple(sorted(dpa.products, key=lambda p: p.id)),
            physical_links=tuple(sorted(physical, key=_link_key)),
        ),
        dynamic=DynamicModel(
            info_links=tuple(sorted(info, key=_link_key)),
            decoupling_point=dpa.decoupling_point,
            inventories=tuple(sorted(dpa.inventories, key=_inv_key)),
        ),
    )


# -- Conceptual Agent Model ---------------------------------------------------


class AgentKind(str, Enum):
    DECISION = "decision"
    EXECUTION = "execution"
    MEDIATOR = "mediator"


@dataclass(frozen=True)
class ActorAgent:
    name: str
    unit: str
    role: SpatialRole
    members: tuple[str, ...] = ()


@dataclass(frozen=True)
class ActivityAgent:
    name: str
    kind: AgentKind
    origin: tuple[str, ...] = ()
    directive: str = "block"  # block | merge | split | mediator
    level: Optional[DecisionLevel] = None
    functions: tuple[FunctionalArea, ...] = ()
    unit: Optional[str] = None
    specialization: Optional[str] = None
    scope: tuple[str, ...] = ()


@dataclass(frozen=True)
class PhysicalInteraction:
    source: str
    target: str
    product: str
    key: Optional[str] = None
    origins: tuple[int, ...] = ()


@dataclass(frozen=True)
class InfoInteraction:
    source: str
    target: str
    info_type: InfoType
    product: Optional[str] = None
    key: Optional[str] = None
    origins: tuple[int, ...] = ()


@dataclass(frozen=True)
class LinkTrace:
    """A DPA relation as seen from the agent stages (index = declaration order)."""

    index: int
    physical: bool
    source: str
    target: str


@dataclass(frozen=True)
class AgentInventory:
    agent: str
    stock_kind: StockKind
    initial_qty: int
    reorder_point: Optional[int] = None
    reorder_qty: Optional[int] = None


@dataclass(frozen=True)
class ConceptualAgentModel:
    social_structure: Optional[SocialStructure] = None
    actor_agents: tuple[ActorAgent, ...] = ()
    activity_agents: tuple[ActivityAgent, ...] = ()
    objects: tuple[Product, ...] = ()
    physical_interactions: tuple[PhysicalInteraction, ...] = ()
    informational_interactions: tuple[InfoInteraction, ...] = ()
    links: tuple[LinkTrace, ...] = ()
    inventories: tuple[AgentInventory, ...] = ()
    decoupling_point: tuple[str, ...] = ()

    def agent(self, name: str) -> ActivityAgent:
        for a in self.activity_agents:
            if a.name == name:
                return a
        raise KeyError(name)


def _interaction_key(it) -> tuple:
    extra = it.product if isinstance(it, PhysicalInteraction) else it.info_type.value
    return (it.source, it.target, extra or "", it.key or "", it.origins)


def _link_attr(spec: Specialization, link) -> Optional[str]:
    return link.product if spec is Specialization.PRODUCT else link.key


def build_cam(dm: DomainModel, saoa: SaoaSection) -> ConceptualAgentModel:
    """Agentify the Domain Model using the SAOA structural directives.

    Protocol declarations are not read here; they are consumed by
    :func:`build_oam`.
    """
    blocks = {b.id: b for b in dm.structural.blocks}
    merged_into: dict[str, Merge] = {}
    split_of: dict[str, Split] = {}
    mediators: list[Mediator] = []
    for dv in saoa.directives:
        if isinstance(dv, Mediator):
            mediators.append(dv)
            continue
        targets = dv.blocks if isinstance(dv, Merge) else (dv.block,)
        for bid in targets:
            if bid not in blocks:
                raise DeployError(f"directive references unknown block {bid!r}", "dangling-reference", bid)
            if bid in merged_into or bid in split_of:
                raise DeployError(
                    f"block {bid!r} appears in more than one merge/split directive", "directive-overlap", bid
                )
            if isinstance(dv, Merge):
                merged_into[bid] = dv
            else:
                split_of[bid] = dv

    agents: list[ActivityAgent] = []
    for b in dm.structural.blocks:
        if b.id in merged_into or b.id in split_of:
            continue
        agents.append(
            ActivityAgent(
                name=b.id,
                kind=AgentKind.EXECUTION if b.is_execution else AgentKind.DECISION,
                origin=(b.id,),
                level=b.level,
                functions=b.functions,
                unit=b.unit,
            )
        )
    for dv in saoa.directives:
        if isinstance(dv, Merge):
            agents.append(_merged_agent(dv, blocks))
        elif isinstance(dv, Split):
            agents.extend(_split_agents(dv, blocks[dv.block]))

    names = [a.name for a in agents] + [m.agent for m in mediators]
    seen: set[str] = set()
    for n in names:
        if n in seen:
            raise DeployError(f"agent name {n!r} defined twice", "duplicate-agent", n)
        seen.add(n)
    for m in mediators:
        for s in m.scope:
            if s not in seen:
                raise DeployError(
                    f"mediator {m.agent!r} scope names unknown agent {s!r}", "dangling-reference", s
                )
            if s == m.agent:
                raise DeployError(f"mediator {m.agent!r} lists itself in scope", "mediator-scope", s)
        agents.append(
            ActivityAgent(
                name=m.agent,
                kind=AgentKind.MEDIATOR,
                directive="mediator",
                scope=tuple(sorted(set(m.scope))),
            )
        )

    def endpoint(bid: str, link) -> str:
        if bid in merged_into:
            return merged_into[bid].agent
        if bid in split_of:
            dv = split_of[bid]
            spec = dv.parts[0].specialization
            value = _link_attr(spec, link)
            for part in dv.parts:
                if part.key == value:
                    return part.agent
            kind = "physical" if isinstance(link, PhysicalLink) else "informational"
            raise DeployError(
                f"split of {bid!r} by {spec.value} leaves the {kind} interaction "
                f"{link.source} -> {link.target} ({spec.value}={value}) uncovered",
                "split-uncovered",
                bid,
            )
        return bid

    physical: dict[tuple, list[int]] = {}
    for link in dm.structural.physical_links:
        src, dst = endpoint(link.source, link), endpoint(link.target, link)
        if src == dst:
            continue
        physical.setdefault((src, dst, link.product, link.key), []).append(link.origin)
    info: dict[tuple, list[int]] = {}
    for link in dm.dynamic.info_links:
        src, dst = endpoint(link.source, link), endpoint(link.target, link)
        if src == dst:
            continue
        info.setdefault((src, dst, link.info_type, link.product, link.key), []).append(link.origin)
    for m in mediators:
        for s in sorted(set(m.scope)):
            info.setdefault((m.agent, s, InfoType.COORDINATION, None, None), [])
            info.setdefault((s, m.agent, InfoType.COORDINATION, None, None), [])

    by_name = {a.name: a for a in agents}
    phys_items = [
        PhysicalInteraction(s, t, p, k, tuple(sorted(o))) for (s, t, p, k), o in physical.items()
    ]
    for it in phys_items:
        for end in (it.source, it.target):
            if by_name[end].kind is not AgentKind.EXECUTION:
                raise DeployError(
                    f"physical interaction {it.source} -> {it.target} touches non-execution agent {end!r}",
                    "physical-level",
                    end,
                )
    info_items = [
        InfoInteraction(s, t, ty, p, k, tuple(sorted(o))) for (s, t, ty, p, k), o in info.items()
    ]

    actors = []
    for u in dm.structural.units:
        members = sorted(a.name for a in agents if a.unit == u.id)
        actors.append(ActorAgent(u.id, u.id, u.role, tuple(members)))

    inventories = _agent_inventories(dm.dynamic.inventories, merged_into, split_of)
    dp = ()
    if dm.dynamic.decoupling_point:
        bid = dm.dynamic.decoupling_point
        if bid in merged_into:
            dp = (merged_into[bid].agent,)
        elif bid in split_of:
            dp = tuple(sorted(p.agent for p in split_of[bid].parts))
        else:
            dp = (bid,)

    links = []
    for link in dm.structural.physical_links:
        links.append(LinkTrace(link.origin, True, link.source, link.target))
    for link in dm.dynamic.info_links:
        links.append(LinkTrace(link.origin, False, link.source, link.target))

    return ConceptualAgentModel(
        social_structure=saoa.social_structure,
        actor_agents=tuple(sorted(actors, key=lambda a: a.name)),
        activity_agents=tuple(sorted(agents, key=lambda a: a.name)),
        objects=dm.structural.products,
        physical_interactions=tuple(sorted(phys_items, key=_interaction_key)),
        informational_interactions=tuple(sorted(info_items, key=_interaction_key)),
        links=tuple(sorted(links, key=lambda l: l.index)),
        inventories=inventories,
        decoupling_point=dp,
    )


def _merged_agent(dv: Merge, blocks: dict[str, SupplyChainBlock]) -> ActivityAgent:
    members = [blocks[b] for b in dv.blocks]
    units = {b.unit for b in members}
    if len(units) > 1:
        raise DeployError(
            f"merge {dv.agent!r} spans spatial units {', '.join(sorted(units))}", "merge-units", dv.agent
        )
    kinds = {b.is_execution for b in members}
    if len(kinds) > 1:
        raise DeployError(
            f"merge {dv.agent!r} mixes execution and decision blocks", "merge-kinds", dv.agent
        )
    level = min((b.level for b in members), key=LEVEL_ORDER.__getitem__)
    functions = sorted({f for b in members for f in b.functions}, key=list(FunctionalArea).index)
    return ActivityAgent(
        name=dv.agent,
        kind=AgentKind.EXECUTION if members[0].is_execution else AgentKind.DECISION,
        origin=tuple(sorted(dv.blocks)),
        directive="merge",
        level=level,
        functions=tuple(functions),
        unit=members[0].unit,
    )


def _split_agents(dv: Split, block: SupplyChainBlock) -> list[ActivityAgent]:
    specs = {p.specialization for p in dv.parts}
    if len(specs) > 1:
        raise DeployError(
            f"split of {dv.block!r} mixes specializations {', '.join(sorted(s.value for s in specs))}",
            "split-specialization",
            dv.block,
        )
    keys = [p.key for p in dv.parts]
    if len(set(keys)) != len(keys):
        raise DeployError(f"split of {dv.block!r} repeats a specialization key", "split-specialization", dv.block)
    return [
        ActivityAgent(
            name=p.agent,
            kind=AgentKind.EXECUTION if block.is_execution else AgentKind.DECISION,
            origin=(block.id,),
            directive="split",
            level=block.level,
            functions=block.functions,
            unit=block.unit,
            specialization=f"{p.specialization.value}:{p.key}",
        )
        for p in dv.parts
    ]


def _agent_inventories(
    decls: Iterable[InventoryDecl], merged_into: dict[str, Merge], split_of: dict[str, Split]
) -> tuple[AgentInventory, ...]:
    out: dict[tuple[str, StockKind], AgentInventory] = {}
    for inv in decls:
        if inv.block in split_of:
            raise DeployError(
                f"block {inv.block!r} holds inventory and cannot be split", "split-inventory", inv.block
            )
        agent = merged_into[inv.block].agent if inv.block in merged_into else inv.block
        if (agent, inv.stock_kind) in out:
            raise DeployError(
                f"agent {agent!r} declares {inv.stock_kind.value} inventory twice", "duplicate-inventory", agent
            )
        out[(agent, inv.stock_kind)] = AgentInventory(
            agent, inv.stock_kind, inv.initial_qty, inv.reorder_point, inv.reorder_qty
        )
    return tuple(sorted(out.values(), key=_inv_key))


# -- Operational Agent Model -------------------------------------------------


@dataclass(frozen=True)
class BehaviorState:
    name: str
    passive: bool
    initial: bool = False
    action: Optional[str] = None  # elementary | composite
    ability: Optional[AbilityKind] = None


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    event: str  # external | internal
    trigger: str


@dataclass(frozen=True)
class Behavior:
    states: tuple[BehaviorState, ...] = ()
    transitions: tuple[Transition, ...] = ()


@dataclass(frozen=True)
class MessageStep:
    step: int
    sender: str
    receiver: str
    performative: str


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    type: ProtocolType
    initiators: tuple[str, ...] = ()
    responders: tuple[str, ...] = ()
    arbiter: Optional[str] = None
    bindings: tuple[tuple[str, str, InfoType], ...] = ()
    sequence: tuple[MessageStep, ...] = ()


@dataclass(frozen=True)
class InformExchange:
    source: str
    target: str
    info_type: InfoType


@dataclass(frozen=True)
class AgentSpec:
    name: str
    society: str  # decision | execution
    kind: AgentKind
    origin: tuple[str, ...] = ()
    directive: str = "block"
    unit: Optional[str] = None
    scope: tuple[str, ...] = ()
    knowledge: tuple[str, ...] = ()
    behavior: Behavior = Behavior()
    abilities: tuple[AbilityDecl, ...] = ()
    response_rules: tuple[ResponseRule, ...] = ()
    interactions: tuple[tuple[str, str], ...] = ()
    inventories: tuple[AgentInventory, ...] = ()
    decoupling_point: bool = False

    def ability(self, kind: AbilityKind) -> Optional[AbilityDecl]:
        for a in self.abilities:
            if a.kind is kind:
                return a
        return None


@dataclass(frozen=True)
class OperationalAgentModel:
    decision_society: tuple[AgentSpec, ...] = ()
    execution_society: tuple[AgentSpec, ...] = ()
    protocols: tuple[ProtocolSpec, ...] = ()
    inform_exchanges: tuple[InformExchange, ...] = ()
    responsibility_links: tuple[tuple[str, str], ...] = ()
    physical_interactions: tuple[PhysicalInteraction, ...] = ()
    objects: tuple[Product, ...] = ()
    kpis: tuple[KpiRef, ...] = ()
    uncertainties: tuple[Uncertainty, ...] = ()

    @property
    def agents(self) -> tuple[AgentSpec, ...]:
        return tuple(sorted(self.decision_society + self.execution_society, key=lambda a: a.name))

    def agent(self, name: str) -> AgentSpec:
        for a in self.decision_society + self.execution_society:
            if a.name == name:
                return a
        raise KeyError(name)


# performatives per step; the template table is documented in docs/protocol-templates.md
_CONTRACT = (
    MessageStep(1, "initiator", "responder", "need"),
    MessageStep(2, "responder", "initiator", "offer"),
    MessageStep(3, "initiator", "responder", "accept|reject"),
)
_ARBITRATED = (
    MessageStep(1, "initiator", "responder", "need"),
    MessageStep(2, "responder", "arbiter", "offer"),
    MessageStep(3, "arbiter", "responder", "accept|reject"),
    MessageStep(4, "arbiter", "initiator", "inform|reject"),
)
_RELAY = (MessageStep(1, "initiator", "responder", "inform"),)

SEQUENCE_TEMPLATES: dict[ProtocolType, tuple[MessageStep, ...]] = {
    ProtocolType.NEGOTIATION: _CONTRACT,
    ProtocolType.COORDINATION: _CONTRACT,
    ProtocolType.ARBITRATION: _ARBITRATED,
    ProtocolType.TASK_SHARING: _RELAY,
    ProtocolType.COMMUNICATION: _RELAY,
}

COMPOSITE_ABILITIES = {AbilityKind.PROCURE, AbilityKind.PLAN_PRODUCTION}


def resolve_selector(selector: str, agents: Iterable) -> list[str]:
    """Agent names matched by ``selector``: an agent name, or a block id (every agent born of it)."""
    agents = list(agents)
    names = [a.name for a in agents]
    if selector in names:
        return [selector]
    return sorted(a.name for a in agents if selector in a.origin)


def choose_arbiter(agents: Iterable, initiators: Iterable[str]) -> Optional[str]:
    """Smallest-named mediator whose scope covers every initiator."""
    need = set(initiators)
    for a in sorted(agents, key=lambda a: a.name):
        if a.kind is AgentKind.MEDIATOR and need <= set(a.scope):
            return a.name
    return None


def protocol_spec(
    name: str,
    ptype: ProtocolType,
    bound: Iterable[InfoInteraction],
    agents: Iterable,
) -> ProtocolSpec:
    bound = sorted(bound, key=_interaction_key)
    initiators = tuple(sorted({it.source for it in bound}))
    responders = tuple(sorted({it.target for it in bound}))
    arbiter = None
    if ptype is ProtocolType.ARBITRATION:
        arbiter = choose_arbiter(agents, initiators)
        if arbiter is None:
            raise DeployError(
                f"arbitration protocol {name!r} has no mediator covering {', '.join(initiators)}",
                "no-arbiter",
                name,
            )
    bindings = tuple(sorted({(it.source, it.target, it.info_type) for it in bound}, key=lambda b: (b[0], b[1], b[2].value)))
    return ProtocolSpec(name, ptype, initiators, responders, arbiter, bindings, SEQUENCE_TEMPLATES[ptype])


def _matches(sel, it: InfoInteraction, links: dict[int, LinkTrace]) -> bool:
    if (it.source, it.target) == (sel.source, sel.target):
        return True
    return any((links[o].source, links[o].target) == (sel.source, sel.target) for o in it.origins)


def build_oam(
    cam: ConceptualAgentModel,
    saoa: SaoaSection,
    iaoa: IaoaSection,
    gpa: Optional[GpaSection] = None,
) -> OperationalAgentModel:
    """Form the decision and execution societies and specify every agent.

    ``gpa`` is optional; when given, its KPI declarations and uncertainties
    travel with the model so the runtime can report and sample them.
    """
    agents = cam.activity_agents
    links = {l.index: l for l in cam.links}

    # protocols over informational interactions
    owner: dict[InfoInteraction, str] = {}
    protocols: list[ProtocolSpec] = []
    for decl in sorted(saoa.protocols, key=lambda p: p.name):
        if not decl.binding:
            raise DeployError(f"protocol {decl.name!r} binds no interaction", "protocol-unbound", decl.name)
        bound: list[InfoInteraction] = []
        for sel in decl.binding:
            hits = [it for it in cam.informational_interactions if _matches(sel, it, links)]
            if not hits:
                phys = any(
                    (it.source, it.target) == (sel.source, sel.target)
                    or any((links[o].source, links[o].target) == (sel.source, sel.target) for o in it.origins)
                    for it in cam.physical_interactions
                )
                if phys:
                    raise DeployError(
                        f"protocol {decl.name!r} is bound to physical interaction {sel}",
                        "protocol-physical",
                        decl.name,
                    )
                raise DeployError(
                    f"protocol {decl.name!r} selector {sel} matches no informational interaction",
                    "protocol-unmatched",
                    decl.name,
                )
            for it in hits:
                if it in owner and owner[it] != decl.name:
                    raise DeployError(
                        f"interaction {it.source} -> {it.target} bound to both {owner[it]!r} and {decl.name!r}",
                        "protocol-overlap",
                        decl.name,
                    )
                owner[it] = decl.name
                if it not in bound:
                    bound.append(it)
        protocols.append(protocol_spec(decl.name, decl.type, bound, agents))

    informs = tuple(
        InformExchange(it.source, it.target, it.info_type)
        for it in cam.informational_interactions
        if it not in owner
    )
    informs = tuple(sorted(set(informs), key=lambda x: (x.source, x.target, x.info_type.value)))

    # abilities and response rules
    abilities: dict[str, dict[AbilityKind, AbilityDecl]] = {a.name: {} for a in agents}
    for decl in iaoa.abilities:
        hits = resolve_selector(decl.selector, agents)
        if not hits:
            raise DeployError(f"ability selector {decl.selector!r} matches no agent", "unresolved-selector", decl.selector)
        for name in hits:
            if decl.kind in abilities[name]:
                raise DeployError(
                    f"agent {name!r} declares {decl.kind.value} twice", "duplicate-ability", name
                )
            abilities[name][decl.kind] = AbilityDecl(name, decl.kind, decl.params)
    rules: dict[str, list[ResponseRule]] = {a.name: [] for a in agents}
    for rule in iaoa.responses:
        hits = resolve_selector(rule.selector, agents)
        if not hits:
            raise DeployError(f"rule selector {rule.selector!r} matches no agent", "unresolved-selector", rule.selector)
        for name in hits:
            if rule.action not in abilities[name]:
                raise DeployError(
                    f"rule on {name!r} fires undeclared ability {rule.action.value!r}",
                    "undeclared-ability",
                    name,
                )
            if AbilityKind.MONITOR_INVENTORY not in abilities[name]:
                raise DeployError(
                    f"rule on {name!r} reads {rule.quantity!r} but the agent cannot monitor_inventory",
                    "unmonitored-quantity",
                    name,
                )
            rules[name].append(ResponseRule(name, rule.quantity, rule.op, rule.threshold, rule.action))

    # responsibility links: execution agent <- decision agents of its package
    resp = sorted(
        (d.name, e.name)
        for e in agents
        if e.kind is AgentKind.EXECUTION and e.unit is not None
        for d in agents
        if d.kind is AgentKind.DECISION and d.unit == e.unit
    )

    inventories: dict[str, list[AgentInventory]] = {a.name: [] for a in agents}
    for inv in cam.inventories:
        inventories.setdefault(inv.agent, []).append(inv)

    roles: dict[str, set[tuple[str, str]]] = {a.name: set() for a in agents}
    for p in protocols:
        for n in p.initiators:
            roles[n].add((p.name, "initiator"))
        for n in p.responders:
            roles[n].add((p.name, "responder"))
        if p.arbiter:
            roles[p.arbiter].add((p.name, "arbiter"))
    for x in informs:
        roles[x.source].add(("default-inform", "sender"))
        roles[x.target].add(("default-inform", "receiver"))

    specs = []
    for a in agents:
        abil = tuple(sorted(abilities[a.name].values(), key=lambda d: ABILITY_ORDER[d.kind]))
        behavior = synthesize_behavior(a.name, abil, rules[a.name], protocols, informs)
        specs.append(
            AgentSpec(
                name=a.name,
                society="execution" if a.kind is AgentKind.EXECUTION else "decision",
                kind=a.kind,
                origin=a.origin,
                directive=a.directive,
                unit=a.unit,
                scope=a.scope,
                knowledge=_knowledge(a.name, abil, inventories[a.name], informs),
                behavior=behavior,
                abilities=abil,
                response_rules=tuple(rules[a.name]),
                interactions=tuple(sorted(roles[a.name])),
                inventories=tuple(inventories[a.name]),
                decoupling_point=a.name in cam.decoupling_point,
            )
        )
    gpa = gpa or GpaSection()
    return OperationalAgentModel(
        decision_society=tuple(s for s in specs if s.society == "decision"),
        execution_society=tuple(s for s in specs if s.society == "execution"),
        protocols=tuple(protocols),
        inform_exchanges=informs,
        responsibility_links=tuple(resp),
        physical_interactions=cam.physical_interactions,
        objects=cam.objects,
        kpis=tuple(gpa.kpis),
        uncertainties=tuple(gpa.uncertainties),
    )


def _knowledge(name, abilities, inventories, informs) -> tuple[str, ...]:
    kinds = {a.kind for a in abilities}
    out = [f"stock.{inv.stock_kind.value}" for inv in inventories]
    if AbilityKind.PROCURE in kinds:
        out += ["on_order", "position"]
    if AbilityKind.SELL in kinds:
        out += ["backorders", "demand"]
    if AbilityKind.SHIP in kinds:
        out.append("order_book")
    if kinds & {AbilityKind.PLAN_PRODUCTION, AbilityKind.DISPATCH}:
        out.append("work_queue")
    out += [f"known.{x.source}" for x in informs if x.target == name]
    return tuple(sorted(set(out)))


def _intrinsic_triggers(name, ability: AbilityDecl, protocols, informs) -> list[tuple[str, str]]:
    kind = ability.kind
    if kind is AbilityKind.PROCURE:
        rp = ability.param("reorder_point")
        cond = f"position <= {rp}" if rp is not None else "position <= reorder_point"
        return [("internal", f"threshold: {cond}")]
    if kind is AbilityKind.DISPATCH:
        return [("internal", "threshold: work_queue > 0")]
    if kind is AbilityKind.SHIP:
        out = []
        for p in protocols:
            if name in p.responders:
                perf = "inform" if p.type in (ProtocolType.COMMUNICATION, ProtocolType.TASK_SHARING) else "accept"
                out.append(("external", f"message: {perf}"))
        if any(x.target == name and x.info_type is InfoType.NEEDS_EXPRESSION for x in informs):
            out.append(("external", "message: inform"))
        if not out:
            out.append(("internal", "threshold: order_book > 0"))
        return sorted(set(out))
    return [("internal", "timer: period")]


def synthesize_behavior(name, abilities, rules, protocols, informs) -> Behavior:
    """One passive waiting state plus one active state per ability.

    Rule-gated abilities are entered on the rule's threshold event; the
    others on their intrinsic timer, threshold or message event. Every
    active state returns to waiting on the internal ``done`` event.
    """
    states = [BehaviorState("waiting", passive=True, initial=True)]
    transitions: list[Transition] = []
    gated = {r.action for r in rules}
    for ab in abilities:
        active = f"active:{ab.kind.value}"
        action = "composite" if ab.kind in COMPOSITE_ABILITIES else "elementary"
        states.append(BehaviorState(active, passive=False, action=action, ability=ab.kind))
        if ab.kind in gated:
            triggers = [("internal", f"threshold: {r.condition_text()}") for r in rules if r.action is ab.kind]
        else:
            triggers = _intrinsic_triggers(name, ab, protocols, informs)
        for event, trigger in triggers:
            transitions.append(Transition("waiting", active, event, trigger))
        transitions.append(Transition(active, "waiting", "internal", "done"))
    return Behavior(tuple(states), tuple(transitions))


# -- whole pipeline ---------------------------------------------------------


@dataclass(frozen=True)
class Deployment:
    dm: DomainModel
    cam: ConceptualAgentModel
    oam: OperationalAgentModel


def deploy(model: AnalysisModel) -> Deployment:
    dm = build_domain_model(model.dpa)
    cam = build_cam(dm, model.saoa)
    oam = build_oam(cam, model.saoa, model.iaoa, model.gpa)
    return Deployment(dm, cam, oam)
