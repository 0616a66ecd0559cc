"""Run the demo's factorial plan and print the per-cell report.

    python3 scripts/run_experiment.py [--replications 5] [--seed 2024] [--parallel]
"""

import argparse
import time
from pathlib import Path

from famass.deploy import deploy
from famass.exper import ExperimentPlan, run_plan
from famass.fml import parse_file

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "tests" / "fixtures" / "demo.fml"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--replications", type=int, default=5)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--parallel", action="store_true")
    args = p.parse_args()

    model = parse_file(DEMO)
    plan = ExperimentPlan.from_gpa(model.gpa, args.replications, args.seed, args.horizon)
    t0 = time.perf_counter()
    report = run_plan(deploy(model).oam, plan, parallel=args.parallel)
    print(report.to_csv(), end="")
    runs = len(plan.cells()) * plan.replications
    print(f"# {len(plan.cells())} cells, {runs} runs, {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
