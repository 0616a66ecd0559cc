"""Command-line driver: validate, deploy, emit, simulate, experiment.

Exit codes: 0 success, 1 model/validation/runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

from famass import emit as em
from famass.deploy import DeployError, OperationalAgentModel, deploy
from famass.exper import ExperimentError, ExperimentPlan, PlanError, run_plan
from famass.fml import FmlError, parse_fml, resolve
from famass.simrt import InitError, SimConfig, SimulationError, kpis, simulate, trace_csv

STAGE_ORDER = ("dm", "cam", "oam")


class CliError(Exception):
    """Reported on stderr; exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: usage error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _color() -> bool:
    mode = os.environ.get("FAMASS_COLOR", "auto")
    return mode != "never" and sys.stderr.isatty()


def _err(line: str) -> None:
    if _color():
        # colour the "file:line:col:" location prefix of diagnostics
        head, sep, rest = line.partition(": ")
        line = f"\x1b[1;31m{head}\x1b[0m{sep}{rest}" if sep else line
    print(line, file=sys.stderr)


def _read(path: str) -> str:
    try:
        return Path(path).read_bytes().decode("utf-8")
    except OSError as e:
        raise CliError(f"cannot read: {e.strerror or e}") from None
    except UnicodeDecodeError:
        raise CliError("not valid UTF-8") from None


def _is_dump(text: str) -> bool:
    return text.lstrip().startswith("{")


def _model_name(path: str) -> str:
    name = Path(path).name
    for suffix in (".fml", ".dump"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    for stage in STAGE_ORDER:
        if name.endswith("." + stage):
            name = name[: -len(stage) - 1]
    return name or "model"


def _load_model(path: str):
    """Parse and resolve an FML file; exit-1 diagnostics on any defect."""
    text = _read(path)
    model = parse_fml(text, path)
    report = resolve(model)
    if len(report):
        for v in report:
            _err(v.format(path))
        raise SystemExit(1)
    return model


def _load_any(path: str):
    """Return ``(name, stage, object)``; object is an AnalysisModel for FML input."""
    text = _read(path)
    if _is_dump(text):
        try:
            stage, name, obj = em.load(text)
        except em.DumpError as e:
            raise CliError(str(e)) from None
        return name, stage, obj
    return _model_name(path), "fml", _load_model(path)


# -- commands ---------------------------------------------------------------------


def cmd_validate(args) -> int:
    _load_model(args.file)
    return 0


def cmd_deploy(args) -> int:
    model = _load_model(args.file)
    dep = deploy(model)
    files = em.deployment_files(dep, _model_name(args.file))
    em.write_files(args.out, files)
    return 0


def cmd_emit(args) -> int:
    name, stage, obj = _load_any(args.file)
    if stage == "fml":
        dep = deploy(obj)
        target = {"dm": dep.dm, "cam": dep.cam, "oam": dep.oam}[args.stage]
    else:
        if args.stage != stage:
            raise CliError(f"this is a {stage} dump; it cannot emit stage {args.stage}")
        target = obj
    em.write_files(args.out, em.render_files(target, name))
    return 0


def _oam_of(args) -> tuple[str, OperationalAgentModel]:
    name, stage, obj = _load_any(args.file)
    if stage == "fml":
        return name, deploy(obj).oam
    if stage != "oam":
        raise CliError(f"this is a {stage} dump; simulation needs FML or an oam dump")
    return name, obj


def cmd_simulate(args) -> int:
    name, oam = _oam_of(args)
    cfg = SimConfig(horizon=args.horizon, seed=args.seed, trace=args.trace)
    state = simulate(oam, cfg)
    report = kpis(state)
    if args.out:
        files = {f"{name}.kpi.csv": report.to_csv(), f"{name}.kpi.dump": report.dump()}
        if args.trace:
            files[f"{name}.trace.csv"] = trace_csv(state)
        em.write_files(args.out, files)
    else:
        sys.stdout.write(report.to_csv())
        if args.trace:
            sys.stdout.write("\n" + trace_csv(state))
    return 0


def cmd_experiment(args) -> int:
    model = _load_model(args.file)
    oam = deploy(model).oam
    plan = ExperimentPlan.from_gpa(model.gpa, args.replications, args.seed, args.horizon)
    report = run_plan(oam, plan, parallel=args.parallel, workers=args.workers)
    name = _model_name(args.file)
    if args.out:
        em.write_files(args.out, {f"{name}.experiment.csv": report.to_csv(), f"{name}.experiment.dump": report.dump()})
    else:
        sys.stdout.write(report.to_csv())
    return 0


# -- argument parsing ------------------------------------------------------------------


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits (0 .. 2**64-1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="famass",
        description="Deploy FML analysis models to agent models, emit diagrams, simulate and run experiments.",
        epilog="Environment: FAMASS_COLOR=auto|never controls coloured diagnostics on stderr.",
    )
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    v = sub.add_parser("validate", help="check an FML model; prints one line per violation")
    v.add_argument("file", help="FML model")
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("deploy", help="write dm, cam and oam dumps and diagrams")
    d.add_argument("file", help="FML model")
    d.add_argument("-o", "--out", required=True, metavar="DIR", help="output directory (written atomically)")
    d.set_defaults(func=cmd_deploy)

    e = sub.add_parser("emit", help="write the diagrams and dump of one stage")
    e.add_argument("file", help="FML model or a stage dump")
    e.add_argument("--stage", choices=STAGE_ORDER, required=True, help="stage to emit")
    e.add_argument("-o", "--out", required=True, metavar="DIR", help="output directory (written atomically)")
    e.set_defaults(func=cmd_emit)

    s = sub.add_parser("simulate", help="run the model and print KPIs as CSV")
    s.add_argument("file", help="FML model or an oam dump")
    s.add_argument("--horizon", type=_positive, default=20, metavar="N", help="periods to simulate (default 20)")
    s.add_argument("--seed", type=_seed, default=0, metavar="N", help="64-bit seed (default 0)")
    s.add_argument("--trace", action="store_true", help="also write the per-period event trace")
    s.add_argument("-o", "--out", metavar="DIR", help="write <model>.kpi.csv/.kpi.dump (and trace) here")
    s.set_defaults(func=cmd_simulate)

    x = sub.add_parser("experiment", help="run the full-factorial plan declared in the model's gpa section")
    x.add_argument("file", help="FML model")
    x.add_argument("--replications", type=_positive, default=1, metavar="N", help="replications per cell (default 1)")
    x.add_argument("--seed", type=_seed, default=0, metavar="N", help="base seed (default 0)")
    x.add_argument("--horizon", type=_positive, default=20, metavar="N", help="periods per run (default 20)")
    x.add_argument("--parallel", action="store_true", help="run replications in worker processes")
    x.add_argument("--workers", type=_positive, default=None, metavar="N", help="worker processes for --parallel")
    x.add_argument("-o", "--out", metavar="DIR", help="write <model>.experiment.csv/.experiment.dump here")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except SystemExit as e:
        return int(e.code or 0)
    except FmlError as e:
        for err in e.errors:
            _err(err.format(args.file))
        return 1
    except DeployError as e:
        _err(f"{args.file}: {e.code}: {e.message}")
        return 1
    except (InitError, SimulationError, PlanError, ExperimentError, CliError) as e:
        _err(f"{args.file}: {e}")
        return 1
    except OSError as e:
        _err(f"{args.file}: cannot write output: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
