"""Deterministic discrete-event runtime for an Operational Agent Model.

Time advances in whole periods. Within a period the order is fixed:
message delivery, then every agent in sorted-name order (response rules,
protocol inbox, remaining abilities), then the material-balance check and
KPI accumulation. Every message takes at least one period, so agents
never see a message sent in the same period and activation order cannot
leak into results. Simulation semantics are written up in docs/simulation.md.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from famass.analysis import ABILITY_PARAMS, AbilityDecl, AbilityKind, Distribution, Metric, ProtocolType, StockKind
from famass.codec import canonical_json
from famass.deploy import SEQUENCE_TEMPLATES, OperationalAgentModel, ProtocolSpec, choose_arbiter

PERFORMATIVES = ("need", "offer", "accept", "reject", "inform", "ship_notice")
CONTRACT_TYPES = {ProtocolType.NEGOTIATION, ProtocolType.COORDINATION}
RELAY_TYPES = {ProtocolType.COMMUNICATION, ProtocolType.TASK_SHARING}
# non-gated abilities run in this order after the protocol phase
ABILITY_SEQUENCE = (
    AbilityKind.MONITOR_INVENTORY,
    AbilityKind.SELL,
    AbilityKind.PLAN_PRODUCTION,
    AbilityKind.DISPATCH,
    AbilityKind.SHIP,
    AbilityKind.PROCURE,
)
DIRECT = ""  # route name for needs sent without a protocol


class InitError(Exception):
    pass


class SimulationError(Exception):
    pass


class OverrideError(ValueError):
    pass


DemandSpec = Union[int, float, str, Distribution]


@dataclass
class SimConfig:
    horizon: int = 20
    seed: int = 0
    demand: dict[str, DemandSpec] = field(default_factory=dict)
    overrides: dict[str, Any] = field(default_factory=dict)
    holding_cost: float = 1.0
    backorder_cost: float = 5.0
    trace: bool = False
    cell: int = 0
    replication: int = 0

    def __post_init__(self):
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ValueError(f"horizon must be an integer >= 1, got {self.horizon!r}")


@dataclass(frozen=True)
class Message:
    send_time: int
    deliver_time: int
    sender: str
    receiver: str
    performative: str
    product: str = ""
    qty: int = 0
    price: float = 0.0
    due: int = 0
    need: int = 0
    protocol: str = ""
    round: int = 0
    seq: int = 0


@dataclass
class Order:
    customer: str
    qty: int
    need: int


@dataclass
class Need:
    id: int
    initiator: str
    qty: int
    product: str
    route: str
    first_issue: int
    round: int = 0
    expected: tuple[str, ...] = ()
    replies: dict[str, Optional[float]] = field(default_factory=dict)
    supplier: str = ""
    received: int = 0
    completed: Optional[int] = None
    outcomes: list[str] = field(default_factory=list)  # per round: accepted | reissued


@dataclass
class AgentRt:
    name: str
    abilities: dict[AbilityKind, AbilityDecl]
    rules: tuple
    stock: dict[StockKind, int]
    product: dict[StockKind, str]
    receipt_kind: Optional[StockKind] = None
    route: Optional[str] = None
    suppliers: tuple[str, ...] = ()
    demand: Optional[Distribution] = None
    rng: Optional[random.Random] = None
    on_order: int = 0
    backorders: int = 0
    order_book: deque = field(default_factory=deque)
    work: deque = field(default_factory=deque)
    known: dict[str, int] = field(default_factory=dict)
    inbox: list = field(default_factory=list)

    @property
    def on_hand(self) -> int:
        return sum(self.stock.values())

    def quantity(self, name: str) -> int:
        if name == "on_hand":
            return self.on_hand
        if name in ("raw_material", "wip", "final_product"):
            return self.stock.get(StockKind(name), 0)
        if name == "on_order":
            return self.on_order
        if name == "position":
            kind = self.receipt_kind or _default_receipt(self.stock)
            return (self.stock.get(kind, 0) if kind else 0) + self.on_order
        if name == "backorders":
            return self.backorders
        if name == "order_book":
            return sum(o.qty for o in self.order_book)
        raise SimulationError(f"unknown quantity {name!r}")


@dataclass
class SimState:
    oam: OperationalAgentModel
    cfg: SimConfig
    clock: int = 0
    agents: dict[str, AgentRt] = field(default_factory=dict)
    queue: list = field(default_factory=list)  # heap of (deliver_time, seq, Message)
    seq: int = 0
    needs: dict[int, Need] = field(default_factory=dict)
    protocols: dict[str, ProtocolSpec] = field(default_factory=dict)
    informs: tuple = ()
    initial: dict[str, int] = field(default_factory=dict)
    produced: dict[str, int] = field(default_factory=dict)
    consumed: dict[str, int] = field(default_factory=dict)
    in_transit: dict[str, int] = field(default_factory=dict)
    # KPI accumulators
    onhand_sum: int = 0
    backorder_sum: int = 0
    demanded: int = 0
    on_time: int = 0
    # always-on records used by the property tests
    trajectory: list = field(default_factory=list)  # (period, agent, stock kind, qty) after each period
    sent: list = field(default_factory=list)
    delivered: list = field(default_factory=list)
    balance: list = field(default_factory=list)  # (period, product, initial, produced, on_hand, in_transit, consumed)
    trace: list = field(default_factory=list)  # (period, agent, event, qty) when cfg.trace

    def snapshot(self) -> dict:
        """Plain tree of the mutable state, for dumps and equality checks."""
        return {
            "clock": self.clock,
            "agents": {
                n: {
                    "stock": {k.value: v for k, v in a.stock.items()},
                    "on_order": a.on_order,
                    "backorders": a.backorders,
                    "order_book": [[o.customer, o.qty, o.need] for o in a.order_book],
                    "work": list(a.work),
                    "known": dict(a.known),
                }
                for n, a in self.agents.items()
            },
            "queue": [dataclasses.asdict(m) for _, _, m in sorted(self.queue)],
            "needs": {str(k): _need_tree(v) for k, v in self.needs.items()},
            "balance": {
                "initial": dict(self.initial),
                "produced": dict(self.produced),
                "consumed": dict(self.consumed),
                "in_transit": dict(self.in_transit),
            },
            "kpi": {
                "onhand_sum": self.onhand_sum,
                "backorder_sum": self.backorder_sum,
                "demanded": self.demanded,
                "on_time": self.on_time,
            },
        }

    def dump(self) -> str:
        return canonical_json({"format": "famass-state", "version": 1, "seed": self.cfg.seed, "state": self.snapshot()})


def _need_tree(n: Need) -> dict:
    d = dataclasses.asdict(n)
    d["expected"] = list(n.expected)
    return d


@dataclass(frozen=True)
class KpiReport:
    values: tuple[tuple[str, Union[int, float]], ...]

    def __getitem__(self, name: str):
        for k, v in self.values:
            if k == name:
                return v
        raise KeyError(name)

    def as_dict(self) -> dict:
        return dict(self.values)

    def to_csv(self) -> str:
        rows = ["kpi,value"] + [f"{k},{format_value(v)}" for k, v in sorted(self.values)]
        return "\n".join(rows) + "\n"

    def dump(self) -> str:
        return canonical_json({"format": "famass-kpi", "version": 1, "kpis": dict(self.values)})


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


# -- overrides -------------------------------------------------------------------


def _to_distribution(value, oam: OperationalAgentModel) -> Distribution:
    if isinstance(value, Distribution):
        return value
    if isinstance(value, bool):
        raise OverrideError(f"invalid demand {value!r}")
    if isinstance(value, (int, float)):
        if value < 0:
            raise OverrideError(f"demand must be non-negative, got {value!r}")
        return Distribution("constant", (value,))
    if isinstance(value, str):
        for u in oam.uncertainties:
            if u.name == value:
                return u.distribution
        raise OverrideError(f"demand {value!r} is neither a number nor a declared uncertainty")
    raise OverrideError(f"invalid demand {value!r}")


def apply_overrides(oam: OperationalAgentModel, cfg: SimConfig) -> tuple[OperationalAgentModel, SimConfig]:
    """Fold ``cfg.overrides`` into a copy of the model and config.

    Keys are ``<agent>.<ability>.<param>``, ``demand.<agent>``,
    ``protocol.<name>.type``, ``cost.holding`` and ``cost.backorder``.
    """
    demand = dict(cfg.demand)
    holding, backorder = cfg.holding_cost, cfg.backorder_cost
    specs = {a.name: a for a in oam.agents}
    protocols = {p.name: p for p in oam.protocols}
    for key, value in sorted(cfg.overrides.items()):
        if key.startswith("demand."):
            agent = key[len("demand."):]
            if agent not in specs:
                raise OverrideError(f"override {key!r}: no agent {agent!r}")
            demand[agent] = _to_distribution(value, oam)
        elif key.startswith("cost."):
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                raise OverrideError(f"override {key!r}: cost must be a non-negative number")
            if key == "cost.holding":
                holding = float(value)
            elif key == "cost.backorder":
                backorder = float(value)
            else:
                raise OverrideError(f"unknown cost override {key!r}")
        elif key.startswith("protocol."):
            parts = key.split(".")
            name = ".".join(parts[1:-1])
            if parts[-1] != "type" or name not in protocols:
                raise OverrideError(f"override {key!r} names no protocol type")
            try:
                ptype = ProtocolType(value)
            except ValueError:
                raise OverrideError(f"override {key!r}: unknown protocol type {value!r}") from None
            p = protocols[name]
            arbiter = None
            if ptype is ProtocolType.ARBITRATION:
                arbiter = choose_arbiter(oam.agents, p.initiators)
                if arbiter is None:
                    raise OverrideError(f"override {key!r}: no mediator can arbitrate {name!r}")
            protocols[name] = dataclasses.replace(p, type=ptype, arbiter=arbiter, sequence=SEQUENCE_TEMPLATES[ptype])
        else:
            agent, _, rest = key.rpartition(".")
            agent, _, ability = agent.rpartition(".")
            param = rest
            if agent not in specs:
                raise OverrideError(f"override {key!r}: no agent {agent!r}")
            try:
                kind = AbilityKind(ability)
            except ValueError:
                raise OverrideError(f"override {key!r}: unknown ability {ability!r}") from None
            spec = specs[agent]
            decl = spec.ability(kind)
            if decl is None:
                raise OverrideError(f"override {key!r}: {agent} has no {ability} ability")
            if kind is AbilityKind.SELL and param == "demand":
                value = _to_distribution(value, oam)
            if param not in ABILITY_PARAMS[kind]:
                raise OverrideError(f"override {key!r}: {ability} has no parameter {param!r}")
            abilities = tuple(a.with_param(param, value) if a.kind is kind else a for a in spec.abilities)
            specs[agent] = dataclasses.replace(spec, abilities=abilities)
    new_oam = dataclasses.replace(
        oam,
        decision_society=tuple(specs[a.name] for a in oam.decision_society),
        execution_society=tuple(specs[a.name] for a in oam.execution_society),
        protocols=tuple(protocols[p.name] for p in oam.protocols),
    )
    new_cfg = dataclasses.replace(cfg, demand=demand, overrides={}, holding_cost=holding, backorder_cost=backorder)
    return new_oam, new_cfg


# -- init ------------------------------------------------------------------------


def _default_receipt(stock) -> Optional[StockKind]:
    if StockKind.RAW_MATERIAL in stock:
        return StockKind.RAW_MATERIAL
    if StockKind.FINAL_PRODUCT in stock:
        return StockKind.FINAL_PRODUCT
    return None


def _single(products: set[str], agent: str, what: str) -> Optional[str]:
    if len(products) > 1:
        raise InitError(f"agent {agent!r} has ambiguous {what} products: {', '.join(sorted(products))}")
    return next(iter(products), None)


def _needs_route(name: str, oam: OperationalAgentModel) -> tuple[Optional[str], tuple[str, ...]]:
    """(route, suppliers) for an agent's needs: first protocol binding it as a needs sender, else direct."""
    for p in sorted(oam.protocols, key=lambda p: p.name):
        targets = sorted({t for s, t, ty in p.bindings if s == name and ty.value == "needs_expression"})
        if targets:
            return p.name, tuple(targets)
    direct = sorted({x.target for x in oam.inform_exchanges if x.source == name and x.info_type.value == "needs_expression"})
    if direct:
        return DIRECT, (direct[0],)
    return None, ()


def _demand_of(spec, cfg: SimConfig, oam) -> Optional[Distribution]:
    if spec.name in cfg.demand:
        return _to_distribution(cfg.demand[spec.name], oam)
    sell = spec.ability(AbilityKind.SELL)
    if sell is None:
        return None
    return _to_distribution(sell.param("demand", 0), oam)


def init(oam: OperationalAgentModel, cfg: SimConfig) -> SimState:
    """Build the period-0 state. Overrides in ``cfg`` are applied first."""
    if cfg.overrides:
        try:
            oam, cfg = apply_overrides(oam, cfg)
        except OverrideError as e:
            raise InitError(str(e)) from None
    state = SimState(oam=oam, cfg=cfg)
    state.protocols = {p.name: p for p in oam.protocols}
    state.informs = tuple(x for x in oam.inform_exchanges if x.info_type.value != "needs_expression")

    inbound: dict[str, set[str]] = {}
    outbound: dict[str, set[str]] = {}
    links: dict[tuple[str, str], set[str]] = {}
    for it in oam.physical_interactions:
        inbound.setdefault(it.target, set()).add(it.product)
        outbound.setdefault(it.source, set()).add(it.product)
        links.setdefault((it.source, it.target), set()).add(it.product)

    for spec in oam.agents:
        name = spec.name
        abilities = {a.kind: a for a in spec.abilities}
        stock = {inv.stock_kind: inv.initial_qty for inv in spec.inventories}
        gated = {r.action for r in spec.response_rules}
        inb = _single(inbound.get(name, set()), name, "inbound")
        outb = _single(outbound.get(name, set()), name, "outbound")
        local = f"<{name}>"
        product: dict[StockKind, str] = {}
        for kind in stock:
            if kind is StockKind.RAW_MATERIAL:
                product[kind] = inb or local
            else:
                product[kind] = outb or inb or local

        for kind, needs in (
            (AbilityKind.SELL, StockKind.FINAL_PRODUCT),
            (AbilityKind.SHIP, StockKind.FINAL_PRODUCT),
            (AbilityKind.PLAN_PRODUCTION, StockKind.FINAL_PRODUCT),
            (AbilityKind.DISPATCH, StockKind.FINAL_PRODUCT),
        ):
            if kind in abilities and needs not in stock:
                raise InitError(f"agent {name!r} can {kind.value} but declares no {needs.value} inventory")
        receipt = None
        route, suppliers = None, ()
        if AbilityKind.PROCURE in abilities:
            receipt = _default_receipt(stock)
            if receipt is None:
                raise InitError(f"agent {name!r} can procure but declares no inventory")
            route, suppliers = _needs_route(name, oam)
            if route is None:
                raise InitError(f"agent {name!r} can procure but expresses needs to no one")
            decl = abilities[AbilityKind.PROCURE]
            inv = next(i for i in spec.inventories if i.stock_kind is receipt)
            rp = decl.param("reorder_point", inv.reorder_point)
            rq = decl.param("reorder_qty", inv.reorder_qty)
            if rp is None or rq is None:
                raise InitError(f"agent {name!r} has no reorder point/quantity for procure")
            for s in suppliers:
                if not links.get((s, name)):
                    raise InitError(f"supplier {s!r} has no physical link to {name!r}")
        agent = AgentRt(
            name=name,
            abilities=abilities,
            rules=spec.response_rules,
            stock=stock,
            product=product,
            receipt_kind=receipt,
            route=route,
            suppliers=suppliers,
            demand=_demand_of(spec, cfg, oam),
            rng=random.Random(f"{cfg.seed}/{name}"),
        )
        state.agents[name] = agent

    # suppliers must be able to ship what the procurer stores
    for agent in state.agents.values():
        for s in agent.suppliers:
            sup = state.agents[s]
            if AbilityKind.SHIP not in sup.abilities:
                raise InitError(f"supplier {s!r} of {agent.name!r} cannot ship")
            if sup.product[StockKind.FINAL_PRODUCT] != agent.product[agent.receipt_kind]:
                raise InitError(
                    f"{agent.name!r} stores {agent.product[agent.receipt_kind]} but supplier {s!r} ships "
                    f"{sup.product[StockKind.FINAL_PRODUCT]}"
                )

    for agent in state.agents.values():
        for kind, qty in agent.stock.items():
            p = agent.product[kind]
            state.initial[p] = state.initial.get(p, 0) + qty
    for p in state.initial:
        state.produced[p] = 0
        state.consumed[p] = 0
        state.in_transit[p] = 0
    return state


# -- messaging -------------------------------------------------------------------


def _send(state: SimState, sender: str, receiver: str, performative: str, delay: int = 1, **payload) -> Message:
    if delay < 1:
        raise SimulationError(f"message delay {delay} < 1 from {sender} to {receiver}")
    state.seq += 1
    msg = Message(state.clock, state.clock + delay, sender, receiver, performative, seq=state.seq, **payload)
    heapq.heappush(state.queue, (msg.deliver_time, msg.seq, msg))
    state.sent.append(msg)
    _trace(state, sender, f"send:{performative}", msg.qty)
    return msg


def _trace(state: SimState, agent: str, event: str, qty: int) -> None:
    if state.cfg.trace:
        state.trace.append((state.clock, agent, event, qty))


def _bump(d: dict, key: str, qty: int) -> None:
    d[key] = d.get(key, 0) + qty


def _deliver(state: SimState) -> None:
    while state.queue and state.queue[0][0] <= state.clock:
        _, _, msg = heapq.heappop(state.queue)
        if msg.deliver_time <= msg.send_time:
            raise SimulationError(f"causality breach: {msg}")
        state.delivered.append(msg)
        agent = state.agents[msg.receiver]
        if msg.performative == "ship_notice":
            kind = agent.receipt_kind or _default_receipt(agent.stock)
            agent.stock[kind] += msg.qty
            agent.on_order -= msg.qty
            state.in_transit[msg.product] -= msg.qty
            _trace(state, agent.name, "receive", msg.qty)
            need = state.needs.get(msg.need)
            if need is not None:
                need.received += msg.qty
                if need.received >= need.qty and need.completed is None:
                    need.completed = state.clock
        else:
            agent.inbox.append(msg)


# -- needs and protocols -----------------------------------------------------------


def _issue_need(state: SimState, agent: AgentRt, qty: int) -> None:
    need = Need(
        id=len(state.needs) + 1,
        initiator=agent.name,
        qty=qty,
        product=agent.product[agent.receipt_kind],
        route=agent.route,
        first_issue=state.clock,
    )
    state.needs[need.id] = need
    agent.on_order += qty
    _trace(state, agent.name, "need", qty)
    _broadcast_need(state, need)


def _broadcast_need(state: SimState, need: Need) -> None:
    agent = state.agents[need.initiator]
    need.replies = {}
    if need.route == DIRECT or state.protocols[need.route].type in RELAY_TYPES:
        need.expected = (agent.suppliers[0],)
        _send(state, agent.name, agent.suppliers[0], "inform", product=need.product, qty=need.qty,
              need=need.id, protocol=need.route, round=need.round, due=state.clock)
        return
    need.expected = agent.suppliers
    for s in agent.suppliers:
        _send(state, agent.name, s, "need", product=need.product, qty=need.qty,
              need=need.id, protocol=need.route, round=need.round, due=state.clock)


def _reissue(state: SimState, need: Need) -> None:
    need.outcomes.append("reissued")
    need.round += 1
    _trace(state, need.initiator, "reissue", need.qty)
    _broadcast_need(state, need)


def _can_offer(agent: AgentRt, qty: int) -> bool:
    if AbilityKind.SHIP not in agent.abilities:
        return False
    if AbilityKind.PLAN_PRODUCTION in agent.abilities:
        return True
    available = agent.stock.get(StockKind.FINAL_PRODUCT, 0) - agent.quantity("order_book")
    return available >= qty


def _price(agent: AgentRt) -> float:
    return float(agent.abilities[AbilityKind.SHIP].param("price", 0))


def _book(state: SimState, agent: AgentRt, customer: str, qty: int, need: int) -> None:
    agent.order_book.append(Order(customer, qty, need))
    _trace(state, agent.name, "book", qty)


def _choose(need: Need) -> Optional[str]:
    offers = [(price, name) for name, price in need.replies.items() if price is not None]
    return min(offers)[1] if offers else None


def _close_round(state: SimState, need: Need, decider: str) -> None:
    """All replies are in: accept the cheapest offer (ties to the smallest id), reject the rest."""
    spec = state.protocols[need.route]
    winner = _choose(need)
    arbitrated = spec.type is ProtocolType.ARBITRATION
    for name, price in sorted(need.replies.items()):
        if price is None or name == winner:
            continue
        _send(state, decider, name, "reject", need=need.id, protocol=spec.name, round=need.round)
    if winner is None:
        if arbitrated:
            _send(state, decider, need.initiator, "reject", need=need.id, protocol=spec.name, round=need.round)
        else:
            _reissue(state, need)
        return
    need.supplier = winner
    need.outcomes.append("accepted")
    _send(state, decider, winner, "accept", product=need.product, qty=need.qty,
          price=need.replies[winner], need=need.id, protocol=spec.name, round=need.round)
    if arbitrated:
        _send(state, decider, need.initiator, "inform", product=need.product, qty=need.qty,
              price=need.replies[winner], need=need.id, protocol=spec.name, round=need.round)


def _handle(state: SimState, agent: AgentRt, msg: Message) -> None:
    perf = msg.performative
    need = state.needs.get(msg.need)
    if msg.protocol and msg.protocol in state.protocols:
        spec = state.protocols[msg.protocol]
    else:
        spec = None

    if perf == "need":
        ok = _can_offer(agent, msg.qty)
        reply_to = spec.arbiter if spec.type is ProtocolType.ARBITRATION else msg.sender
        if ok:
            _send(state, agent.name, reply_to, "offer", product=msg.product, qty=msg.qty,
                  price=_price(agent), need=msg.need, protocol=msg.protocol, round=msg.round)
        else:
            _send(state, agent.name, reply_to, "reject", product=msg.product, qty=msg.qty,
                  need=msg.need, protocol=msg.protocol, round=msg.round)
    elif perf in ("offer", "reject") and need is not None and msg.sender in need.expected:
        # a responder's reply, received by the initiator or the arbiter
        if msg.round != need.round:
            return
        need.replies[msg.sender] = msg.price if perf == "offer" else None
        if set(need.replies) == set(need.expected):
            _close_round(state, need, agent.name)
    elif perf == "reject" and need is not None and agent.name == need.initiator:
        # arbiter found no feasible offer
        if msg.round == need.round:
            _reissue(state, need)
    elif perf == "accept":
        initiator = need.initiator if need is not None else msg.sender
        _book(state, agent, initiator, msg.qty, msg.need)
    elif perf == "inform":
        if need is not None and agent.name == need.initiator:
            _trace(state, agent.name, "confirmed", msg.qty)
        elif need is not None:
            # relayed order: book it directly
            need.supplier = agent.name
            need.outcomes.append("accepted")
            _book(state, agent, msg.sender, msg.qty, msg.need)
        else:
            agent.known[msg.sender] = msg.qty
    elif perf == "reject":
        pass  # a losing offerer learns it was not chosen


def execute_protocol(spec: ProtocolSpec, state: SimState) -> SimState:
    """Handle every queued inbox message of ``spec`` for its role players, in sorted agent order."""
    roles = sorted(set(spec.initiators) | set(spec.responders) | ({spec.arbiter} if spec.arbiter else set()))
    for name in roles:
        agent = state.agents[name]
        mine = [m for m in agent.inbox if m.protocol == spec.name]
        agent.inbox = [m for m in agent.inbox if m.protocol != spec.name]
        for msg in mine:
            _handle(state, agent, msg)
    return state


# -- abilities -------------------------------------------------------------------


def _draw(agent: AgentRt) -> int:
    d = agent.demand
    if d is None or d.kind == "none":
        return 0
    if d.kind == "constant":
        x = float(d.params[0])
    elif d.kind == "uniform":
        x = agent.rng.uniform(d.params[0], d.params[1])
    elif d.kind == "normal":
        x = agent.rng.normalvariate(d.params[0], d.params[1])
    else:
        raise SimulationError(f"unknown distribution {d.kind!r}")
    return max(0, math.floor(x + 0.5))


def _sell(state: SimState, agent: AgentRt) -> None:
    demand = _draw(agent)
    fp = StockKind.FINAL_PRODUCT
    backlog = agent.backorders
    due = backlog + demand
    served = min(agent.stock[fp], due)
    agent.stock[fp] -= served
    agent.backorders = due - served
    on_time = max(0, served - backlog)
    _bump(state.consumed, agent.product[fp], served)
    state.demanded += demand
    state.on_time += on_time
    _trace(state, agent.name, "demand", demand)
    _trace(state, agent.name, "served", served)
    if agent.backorders:
        _trace(state, agent.name, "backorder", agent.backorders)


def _queued_work(agent: AgentRt) -> int:
    return sum(agent.work)


def _produce(state: SimState, agent: AgentRt, capacity: Optional[int]) -> None:
    """Drain wip into final product, then work orders FIFO, one raw unit per unit made."""
    fp, raw, wip = StockKind.FINAL_PRODUCT, StockKind.RAW_MATERIAL, StockKind.WIP
    budget = capacity if capacity is not None else math.inf
    if agent.stock.get(wip, 0) and budget > 0:
        n = min(agent.stock[wip], budget)
        agent.stock[wip] -= n
        agent.stock[fp] += n
        budget -= n
    made = 0
    while agent.work and budget > 0:
        want = min(agent.work[0], budget)
        if raw in agent.stock:
            want = min(want, agent.stock[raw])
        if want <= 0:
            break
        if raw in agent.stock:
            agent.stock[raw] -= want
            _bump(state.consumed, agent.product[raw], want)
        agent.stock[fp] += want
        _bump(state.produced, agent.product[fp], want)
        made += want
        budget -= want
        if want == agent.work[0]:
            agent.work.popleft()
        else:
            agent.work[0] -= want
    if made:
        _trace(state, agent.name, "produce", made)


def _plan(state: SimState, agent: AgentRt) -> None:
    net = (
        agent.quantity("order_book")
        + agent.backorders
        - agent.stock[StockKind.FINAL_PRODUCT]
        - agent.stock.get(StockKind.WIP, 0)
        - _queued_work(agent)
    )
    if net > 0:
        agent.work.append(net)
        _trace(state, agent.name, "plan", net)
    if AbilityKind.DISPATCH not in agent.abilities:
        _produce(state, agent, None)


def _dispatch(state: SimState, agent: AgentRt) -> None:
    _produce(state, agent, agent.abilities[AbilityKind.DISPATCH].param("capacity"))


def _ship(state: SimState, agent: AgentRt) -> None:
    fp = StockKind.FINAL_PRODUCT
    lead = agent.abilities[AbilityKind.SHIP].param("lead_time", 1)
    product = agent.product[fp]
    while agent.order_book and agent.stock[fp] > 0:
        order = agent.order_book[0]
        q = min(order.qty, agent.stock[fp])
        agent.stock[fp] -= q
        state.in_transit[product] += q
        _send(state, agent.name, order.customer, "ship_notice", delay=lead, product=product, qty=q, need=order.need)
        order.qty -= q
        if order.qty == 0:
            agent.order_book.popleft()


def _procure(state: SimState, agent: AgentRt, gated: bool) -> None:
    decl = agent.abilities[AbilityKind.PROCURE]
    inv = next(i for i in state.oam.agent(agent.name).inventories if i.stock_kind is agent.receipt_kind)
    rp = decl.param("reorder_point", inv.reorder_point)
    rq = decl.param("reorder_qty", inv.reorder_qty)
    if gated or agent.quantity("position") <= rp:
        _issue_need(state, agent, rq)


def _fire(state: SimState, agent: AgentRt, kind: AbilityKind, gated: bool = False) -> None:
    if kind is AbilityKind.MONITOR_INVENTORY:
        _trace(state, agent.name, "monitor", agent.on_hand)
    elif kind is AbilityKind.SELL:
        _sell(state, agent)
    elif kind is AbilityKind.PLAN_PRODUCTION:
        _plan(state, agent)
    elif kind is AbilityKind.DISPATCH:
        _dispatch(state, agent)
    elif kind is AbilityKind.SHIP:
        _ship(state, agent)
    elif kind is AbilityKind.PROCURE:
        _procure(state, agent, gated)


# -- the period loop ---------------------------------------------------------------


def _check_balance(state: SimState) -> None:
    on_hand: dict[str, int] = {p: 0 for p in state.initial}
    for agent in state.agents.values():
        for kind, qty in agent.stock.items():
            if qty < 0:
                raise SimulationError(f"period {state.clock}: {agent.name} {kind.value} is negative ({qty})")
            _bump(on_hand, agent.product[kind], qty)
    for p in sorted(on_hand):
        lhs = state.initial.get(p, 0) + state.produced.get(p, 0)
        rhs = on_hand[p] + state.in_transit.get(p, 0) + state.consumed.get(p, 0)
        state.balance.append(
            (state.clock, p, state.initial.get(p, 0), state.produced.get(p, 0), on_hand[p],
             state.in_transit.get(p, 0), state.consumed.get(p, 0))
        )
        if lhs != rhs:
            raise SimulationError(
                f"period {state.clock}: material balance broken for {p}: "
                f"initial+produced={lhs} but on_hand+in_transit+consumed={rhs}"
            )


def step(state: SimState) -> SimState:
    """Advance one period in place and return the state."""
    if state.clock >= state.cfg.horizon:
        raise SimulationError(f"clock {state.clock} is past the horizon {state.cfg.horizon}")
    _deliver(state)
    for name in sorted(state.agents):
        agent = state.agents[name]
        gated = {r.action for r in agent.rules}
        for rule in agent.rules:
            if rule.holds(agent.quantity(rule.quantity)):
                _fire(state, agent, rule.action, gated=True)
        inbox, agent.inbox = agent.inbox, []
        for msg in inbox:
            _handle(state, agent, msg)
        for kind in ABILITY_SEQUENCE:
            if kind in agent.abilities and kind not in gated:
                _fire(state, agent, kind)
        for x in state.informs:
            if x.source == name and agent.stock:
                _send(state, name, x.target, "inform", qty=agent.on_hand)
    _check_balance(state)
    for name in sorted(state.agents):
        agent = state.agents[name]
        for kind, qty in sorted(agent.stock.items(), key=lambda kv: kv[0].value):
            state.trajectory.append((state.clock, name, kind.value, qty))
        state.onhand_sum += agent.on_hand
        state.backorder_sum += agent.backorders
    state.clock += 1
    return state


def simulate(oam: OperationalAgentModel, cfg: SimConfig) -> SimState:
    state = init(oam, cfg)
    while state.clock < state.cfg.horizon:
        step(state)
    return state


def kpis(state: SimState) -> KpiReport:
    cfg = state.cfg
    horizon = cfg.horizon
    cycle = [n.completed - n.first_issue for n in state.needs.values() if n.completed is not None]
    values = {
        Metric.AVG_INVENTORY: state.onhand_sum / horizon,
        Metric.FILL_RATE: state.on_time / state.demanded if state.demanded else 1.0,
        Metric.BACKORDER_COUNT: sum(a.backorders for a in state.agents.values()),
        Metric.TOTAL_COST: cfg.holding_cost * state.onhand_sum + cfg.backorder_cost * state.backorder_sum,
        Metric.CYCLE_TIME: sum(cycle) / len(cycle) if cycle else 0.0,
    }
    if state.oam.kpis:
        rows = tuple((k.name, values[k.metric]) for k in state.oam.kpis)
    else:
        rows = tuple((m.value, values[m]) for m in Metric)
    return KpiReport(rows)


def run(oam: OperationalAgentModel, cfg: SimConfig) -> KpiReport:
    return kpis(simulate(oam, cfg))


def trace_csv(state: SimState) -> str:
    rows = ["period,agent,event,qty"] + [f"{p},{a},{e},{q}" for p, a, e, q in state.trace]
    return "\n".join(rows) + "\n"
