"""The four analysis products (GPA, DPA, SAOA, IAOA) as immutable values.

Everything here is plain data. Collections are tuples in declaration order;
the parser and serializer preserve that order so a parse/serialize round
trip gives back an equal model. Source positions live in a side table
(:class:`SourceMap`) that is excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from famass.metamodel import SpatialUnit, SupplyChainBlock


class Metric(str, Enum):
    AVG_INVENTORY = "avg_inventory"
    FILL_RATE = "fill_rate"
    BACKORDER_COUNT = "backorder_count"
    TOTAL_COST = "total_cost"
    CYCLE_TIME = "cycle_time"


class RelationKind(str, Enum):
    PHYSICAL = "physical"
    INFORMATIONAL = "informational"


class InfoType(str, Enum):
    NEEDS_EXPRESSION = "needs_expression"
    OFFERS_EXPRESSION = "offers_expression"
    COORDINATION = "coordination"
    MODEL_EXCHANGE = "model_exchange"


class StockKind(str, Enum):
    RAW_MATERIAL = "raw_material"
    WIP = "wip"
    FINAL_PRODUCT = "final_product"


class SocialStructure(str, Enum):
    HIERARCHICAL = "hierarchical"
    FEDERATED = "federated"
    AUTONOMOUS = "autonomous"


class Specialization(str, Enum):
    PRODUCT = "product"
    PROCESSOR = "processor"
    PROCESS = "process"
    PROJECT = "project"


class ProtocolType(str, Enum):
    COMMUNICATION = "communication"
    COORDINATION = "coordination"
    TASK_SHARING = "task_sharing"
    NEGOTIATION = "negotiation"
    ARBITRATION = "arbitration"


class AbilityKind(str, Enum):
    MONITOR_INVENTORY = "monitor_inventory"
    PROCURE = "procure"
    PLAN_PRODUCTION = "plan_production"
    DISPATCH = "dispatch"
    SHIP = "ship"
    SELL = "sell"


# accepted parameter names per ability, in canonical serialization order
ABILITY_PARAMS: dict[AbilityKind, tuple[str, ...]] = {
    AbilityKind.MONITOR_INVENTORY: (),
    AbilityKind.PROCURE: ("reorder_point", "reorder_qty"),
    AbilityKind.PLAN_PRODUCTION: ("policy",),
    AbilityKind.DISPATCH: ("rule", "capacity"),
    AbilityKind.SHIP: ("lead_time", "price"),
    AbilityKind.SELL: ("demand",),
}

QUANTITIES = (
    "on_hand",
    "raw_material",
    "wip",
    "final_product",
    "on_order",
    "position",
    "backorders",
    "order_book",
)

COMPARATORS = ("<=", "<", ">=", ">", "==")


@dataclass(frozen=True)
class Distribution:
    """``none``, ``constant(v)``, ``uniform(lo, hi)`` or ``normal(mean, sd)``."""

    kind: str
    params: tuple[float, ...] = ()

    def __str__(self) -> str:
        if self.kind == "none":
            return "none"
        return f"{self.kind}({', '.join(repr(p) for p in self.params)})"


DISTRIBUTION_ARITY = {"none": 0, "constant": 1, "uniform": 2, "normal": 2}

Scalar = Union[int, float, str]
ParamValue = Union[int, float, str, Distribution]


# -- GPA ------------------------------------------------------------------


@dataclass(frozen=True)
class Factor:
    name: str
    levels: tuple[Scalar, ...]
    target: Optional[str] = None


@dataclass(frozen=True)
class Uncertainty:
    name: str
    distribution: Distribution


@dataclass(frozen=True)
class KpiRef:
    name: str
    metric: Metric


@dataclass(frozen=True)
class GpaSection:
    objective: str = ""
    questions: tuple[str, ...] = ()
    hypotheses: tuple[str, ...] = ()
    factors: tuple[Factor, ...] = ()
    uncertainties: tuple[Uncertainty, ...] = ()
    kpis: tuple[KpiRef, ...] = ()


# -- DPA ------------------------------------------------------------------


@dataclass(frozen=True)
class Product:
    id: str
    name: str


@dataclass(frozen=True)
class Relation:
    kind: RelationKind
    source: str
    target: str
    info_type: Optional[InfoType] = None
    product: Optional[str] = None
    key: Optional[str] = None

    @property
    def is_physical(self) -> bool:
        return self.kind is RelationKind.PHYSICAL


@dataclass(frozen=True)
class InventoryDecl:
    block: str
    stock_kind: StockKind
    initial_qty: int
    reorder_point: Optional[int] = None
    reorder_qty: Optional[int] = None


@dataclass(frozen=True)
class DpaSection:
    units: tuple[SpatialUnit, ...] = ()
    blocks: tuple[SupplyChainBlock, ...] = ()
    relations: tuple[Relation, ...] = ()
    products: tuple[Product, ...] = ()
    decoupling_point: Optional[str] = None
    inventories: tuple[InventoryDecl, ...] = ()


# -- SAOA -----------------------------------------------------------------


@dataclass(frozen=True)
class Merge:
    blocks: tuple[str, ...]
    agent: str


@dataclass(frozen=True)
class SplitPart:
    agent: str
    specialization: Specialization
    key: str


@dataclass(frozen=True)
class Split:
    block: str
    parts: tuple[SplitPart, ...]


@dataclass(frozen=True)
class Mediator:
    agent: str
    scope: tuple[str, ...]


Directive = Union[Merge, Split, Mediator]


@dataclass(frozen=True)
class Selector:
    """Matches informational relations (by block ids) or interactions (by agent names)."""

    source: str
    target: str

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}"


@dataclass(frozen=True)
class ProtocolDecl:
    name: str
    type: ProtocolType
    binding: tuple[Selector, ...] = ()


@dataclass(frozen=True)
class SaoaSection:
    social_structure: Optional[SocialStructure] = None
    directives: tuple[Directive, ...] = ()
    protocols: tuple[ProtocolDecl, ...] = ()


# -- IAOA -----------------------------------------------------------------


@dataclass(frozen=True)
class AbilityDecl:
    selector: str
    kind: AbilityKind
    params: tuple[tuple[str, ParamValue], ...] = ()

    def param(self, name: str, default=None):
        for k, v in self.params:
            if k == name:
                return v
        return default

    def with_param(self, name: str, value: ParamValue) -> "AbilityDecl":
        order = ABILITY_PARAMS[self.kind]
        merged = dict(self.params)
        merged[name] = value
        params = tuple((k, merged[k]) for k in order if k in merged)
        return AbilityDecl(self.selector, self.kind, params)


@dataclass(frozen=True)
class ResponseRule:
    selector: str
    quantity: str
    op: str
    threshold: float
    action: AbilityKind

    def holds(self, value: float) -> bool:
        t = self.threshold
        return {
            "<=": value <= t,
            "<": value < t,
            ">=": value >= t,
            ">": value > t,
            "==": value == t,
        }[self.op]

    def condition_text(self) -> str:
        return f"{self.quantity} {self.op} {_fmt_threshold(self.threshold)}"


def _fmt_threshold(x: float) -> str:
    return str(x) if isinstance(x, int) else repr(x)


@dataclass(frozen=True)
class IaoaSection:
    abilities: tuple[AbilityDecl, ...] = ()
    responses: tuple[ResponseRule, ...] = ()


@dataclass
class SourceMap:
    """Positions of declarations, keyed like ``("block", "F1.exec")``."""

    filename: str = "<model>"
    positions: dict[tuple[str, str], tuple[int, int]] = field(default_factory=dict)

    def at(self, kind: str, key: str) -> tuple[int, int]:
        return self.positions.get((kind, key), (0, 0))


@dataclass(frozen=True)
class AnalysisModel:
    gpa: GpaSection = GpaSection()
    dpa: DpaSection = DpaSection()
    saoa: SaoaSection = SaoaSection()
    iaoa: IaoaSection = IaoaSection()
    source: Optional[SourceMap] = field(default=None, compare=False, repr=False, hash=False)
