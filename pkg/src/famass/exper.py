"""Full-factorial experiment plans over the runtime.

A plan crosses every factor's levels (cells, in row-major order with the
first factor slowest) and runs each cell ``replications`` times. Seeds are
derived, never sequential:

    seed(c, r) = mix(mix(mix(base_seed) ^ c) ^ r)

where ``mix`` is the splitmix64 finalizer (see docs/seeds.md).
"""

from __future__ import annotations

import dataclasses
import itertools
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from famass.analysis import Factor, KpiRef, Scalar
from famass.codec import canonical_json
from famass.deploy import OperationalAgentModel
from famass.simrt import InitError, OverrideError, SimConfig, SimulationError, apply_overrides, format_value, run

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, cell: int, replication: int) -> int:
    return splitmix64(splitmix64(splitmix64(base_seed & MASK64) ^ cell) ^ replication)


class PlanError(ValueError):
    pass


class ExperimentError(RuntimeError):
    def __init__(self, message: str, cell: int, replication: int):
        super().__init__(f"cell {cell}, replication {replication}: {message}")
        self.cell = cell
        self.replication = replication
        self.detail = message

    def __reduce__(self):
        return (type(self), (self.detail, self.cell, self.replication))


@dataclass(frozen=True)
class ExperimentPlan:
    factors: tuple[Factor, ...] = ()
    replications: int = 1
    base_seed: int = 0
    kpis: tuple[KpiRef, ...] = ()
    horizon: int = 20
    holding_cost: float = 1.0
    backorder_cost: float = 5.0

    def __post_init__(self):
        if not isinstance(self.replications, int) or self.replications < 1:
            raise PlanError(f"replications must be an integer >= 1, got {self.replications!r}")
        for f in self.factors:
            if not f.levels:
                raise PlanError(f"factor {f.name!r} has no levels")
            if not f.target:
                raise PlanError(f"factor {f.name!r} has no target")

    @classmethod
    def from_gpa(cls, gpa, replications: int = 1, base_seed: int = 0, horizon: int = 20) -> "ExperimentPlan":
        return cls(tuple(gpa.factors), replications, base_seed, tuple(gpa.kpis), horizon)

    def cells(self) -> list[tuple[tuple[str, Scalar], ...]]:
        grid = itertools.product(*[f.levels for f in self.factors])
        return [tuple((f.name, lvl) for f, lvl in zip(self.factors, combo)) for combo in grid]


def assignment_text(assign) -> str:
    return ";".join(f"{name}={format_level(v)}" for name, v in assign)


def format_level(v) -> str:
    return format_value(v) if isinstance(v, (int, float)) else str(v)


def expand(plan: ExperimentPlan, oam: Optional[OperationalAgentModel] = None) -> list[SimConfig]:
    """One config per (cell, replication), cell-major.

    With ``oam`` given, every cell's overrides are resolved against it up
    front so a bad level fails before anything runs.
    """
    targets = {f.name: f.target for f in plan.factors}
    configs = []
    for c, assign in enumerate(plan.cells()):
        overrides = {targets[name]: value for name, value in assign}
        if oam is not None:
            try:
                apply_overrides(oam, SimConfig(horizon=plan.horizon, overrides=overrides))
            except OverrideError as e:
                raise PlanError(f"cell {c} ({assignment_text(assign)}): {e}") from None
        for r in range(plan.replications):
            configs.append(
                SimConfig(
                    horizon=plan.horizon,
                    seed=derive_seed(plan.base_seed, c, r),
                    overrides=dict(overrides),
                    holding_cost=plan.holding_cost,
                    backorder_cost=plan.backorder_cost,
                    cell=c,
                    replication=r,
                )
            )
    return configs


@dataclass(frozen=True)
class KpiStats:
    kpi: str
    mean: float
    min: float
    max: float
    sd: float


@dataclass(frozen=True)
class CellResult:
    cell: int
    assignments: tuple[tuple[str, Scalar], ...]
    stats: tuple[KpiStats, ...]


@dataclass(frozen=True)
class ExperimentReport:
    cells: tuple[CellResult, ...] = ()
    runs: tuple[tuple[int, int, int, tuple], ...] = field(default=(), compare=False)  # (cell, rep, seed, kpis)

    def to_csv(self) -> str:
        rows = ["cell,factor_assignments,kpi,mean,min,max,sd"]
        for cr in self.cells:
            assign = assignment_text(cr.assignments)
            for s in cr.stats:
                rows.append(
                    f"{cr.cell},{assign},{s.kpi},{format_value(s.mean)},{format_value(s.min)},"
                    f"{format_value(s.max)},{format_value(s.sd)}"
                )
        return "\n".join(rows) + "\n"

    def dump(self) -> str:
        tree = {
            "format": "famass-experiment",
            "version": 1,
            "cells": [
                {
                    "cell": cr.cell,
                    "assignments": [[k, v] for k, v in cr.assignments],
                    "stats": [
                        {"kpi": s.kpi, "mean": s.mean, "min": s.min, "max": s.max, "sd": s.sd} for s in cr.stats
                    ],
                }
                for cr in self.cells
            ],
        }
        return canonical_json(tree)


def _run_one(args):
    oam, cfg = args
    try:
        return cfg.cell, cfg.replication, cfg.seed, run(oam, cfg).values
    except (InitError, SimulationError) as e:
        raise ExperimentError(str(e), cfg.cell, cfg.replication) from None


def _stats(name: str, xs: list[float]) -> KpiStats:
    xs = [float(x) for x in xs]
    sd = statistics.stdev(xs) if len(xs) > 1 else 0.0
    return KpiStats(name, statistics.fmean(xs), min(xs), max(xs), sd)


def run_plan(
    oam: OperationalAgentModel,
    plan: ExperimentPlan,
    parallel: bool = False,
    workers: Optional[int] = None,
) -> ExperimentReport:
    """Run every replication of every cell and aggregate per cell.

    Results are aggregated in cell-then-replication order whatever the
    completion order, so serial and parallel runs give the same report.
    """
    if plan.kpis:
        oam = _with_kpis(oam, plan.kpis)
    configs = expand(plan, oam)
    jobs = [(oam, cfg) for cfg in configs]
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))

    cells = []
    for c, assign in enumerate(plan.cells()):
        rows = [r[3] for r in results if r[0] == c]
        names = [k for k, _ in rows[0]]
        stats = tuple(_stats(k, [dict(row)[k] for row in rows]) for k in names)
        cells.append(CellResult(c, assign, stats))
    return ExperimentReport(tuple(cells), tuple(results))


def _with_kpis(oam: OperationalAgentModel, kpis) -> OperationalAgentModel:
    return dataclasses.replace(oam, kpis=tuple(kpis))
