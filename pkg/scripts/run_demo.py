"""Deploy and simulate the three-echelon demo, printing KPIs and a stock table.

    python3 scripts/run_demo.py [--horizon 20] [--seed 42] [--out runs/demo]
"""

import argparse
from pathlib import Path

from famass.deploy import deploy
from famass.emit import deployment_files, write_files
from famass.fml import parse_file
from famass.simrt import SimConfig, kpis, simulate

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "tests" / "fixtures" / "demo.fml"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", type=Path, help="also write the deployment files here")
    args = p.parse_args()

    dep = deploy(parse_file(DEMO))
    if args.out:
        write_files(args.out, deployment_files(dep, "demo"))
        print(f"wrote deployment to {args.out}")

    state = simulate(dep.oam, SimConfig(horizon=args.horizon, seed=args.seed))
    stock: dict[int, dict[str, int]] = {}
    for period, agent, kind, qty in state.trajectory:
        row = stock.setdefault(period, {})
        row[agent] = row.get(agent, 0) + qty
    agents = sorted({a for row in stock.values() for a in row})
    print("period " + " ".join(f"{a:>8}" for a in agents))
    for period in sorted(stock):
        print(f"{period:>6} " + " ".join(f"{stock[period].get(a, 0):>8}" for a in agents))
    print()
    print(kpis(state).to_csv(), end="")


if __name__ == "__main__":
    main()
