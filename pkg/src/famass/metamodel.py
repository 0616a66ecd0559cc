"""Supply chain planning cube: axes, Supply Chain Blocks and cube validation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class DecisionLevel(str, Enum):
    STRATEGIC = "strategic"
    TACTICAL = "tactical"
    OPERATIONAL = "operational"
    EXECUTION = "execution"

    @property
    def is_execution(self) -> bool:
        return self is DecisionLevel.EXECUTION


class FunctionalArea(str, Enum):
    PROCUREMENT = "procurement"
    MANUFACTURING = "manufacturing"
    DISTRIBUTION = "distribution"
    SALES = "sales"


class SpatialRole(str, Enum):
    VENDOR = "vendor"
    FACILITY = "facility"
    CLIENT = "client"
    CONSUMER = "consumer"


LEVEL_ORDER = {lvl: i for i, lvl in enumerate(DecisionLevel)}


@dataclass(frozen=True)
class SpatialUnit:
    id: str
    name: str
    role: SpatialRole


@dataclass(frozen=True)
class SupplyChainBlock:
    """A planning or execution unit occupying one cube cell per function.

    ``unit`` holds the id of the owning :class:`SpatialUnit`. ``functions``
    is kept sorted so that equal blocks compare and serialize identically.
    """

    id: str
    unit: str
    level: DecisionLevel
    functions: tuple[FunctionalArea, ...]
    responsibilities: tuple[str, ...] = ()

    @property
    def is_execution(self) -> bool:
        return self.level.is_execution


Cell = tuple[str, DecisionLevel, FunctionalArea]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    subject: str = ""
    line: int = 0
    col: int = 0

    def format(self, filename: str = "<model>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.code}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def extend(self, other: Iterable[Violation]) -> None:
        self.violations.extend(other)

    def format(self, filename: str = "<model>") -> str:
        return "".join(v.format(filename) + "\n" for v in self.violations)


def cube_cells(block: SupplyChainBlock) -> frozenset[Cell]:
    return frozenset((block.unit, block.level, fn) for fn in block.functions)


def decision_blocks(blocks: Iterable[SupplyChainBlock]) -> list[SupplyChainBlock]:
    return [b for b in blocks if not b.is_execution]


def execution_blocks(blocks: Iterable[SupplyChainBlock]) -> list[SupplyChainBlock]:
    return [b for b in blocks if b.is_execution]


def validate_cube(
    blocks: Iterable[SupplyChainBlock],
    units: Optional[Iterable[SpatialUnit]] = None,
) -> ValidationReport:
    """Check a block population against the planning cube.

    Reports duplicate block ids, blocks without functions, cells claimed by
    more than one block and (when ``units`` is given) blocks whose unit is
    not declared. Each duplicated cell is reported once, on the second
    claimant, so a single injected duplicate yields a single violation.
    """
    blocks = list(blocks)
    report = ValidationReport()
    id_counts = Counter(b.id for b in blocks)
    seen_ids: set[str] = set()
    for b in blocks:
        if id_counts[b.id] > 1 and b.id in seen_ids:
            report.violations.append(
                Violation("duplicate-id", f"duplicate block id {b.id!r}", b.id)
            )
        seen_ids.add(b.id)

    known_units = None if units is None else {u.id for u in units}
    owner: dict[Cell, str] = {}
    for b in blocks:
        if known_units is not None and b.unit not in known_units:
            report.violations.append(
                Violation(
                    "dangling-reference",
                    f"block {b.id!r} references undeclared unit {b.unit!r}",
                    b.unit,
                )
            )
        if not b.functions:
            report.violations.append(
                Violation("empty-functions", f"block {b.id!r} declares no function", b.id)
            )
        for cell in sorted(cube_cells(b), key=_cell_key):
            if cell in owner:
                unit, level, fn = cell
                report.violations.append(
                    Violation(
                        "duplicate-cell",
                        f"cell ({unit}, {level.value}, {fn.value}) claimed by "
                        f"{owner[cell]!r} and {b.id!r}",
                        b.id,
                    )
                )
            else:
                owner[cell] = b.id
    return report


def _cell_key(cell: Cell) -> tuple:
    unit, level, fn = cell
    return (unit, LEVEL_ORDER[level], fn.value)
