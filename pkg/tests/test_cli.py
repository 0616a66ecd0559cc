import os
import subprocess
import sys

import pytest

from conftest import FIXTURES, GOLDEN
from famass.cli import main

DEMO = str(FIXTURES / "demo.fml")


def test_validate_clean(capsys):
    assert main(["validate", DEMO]) == 0
    out, err = capsys.readouterr()
    assert out == "" and err == ""


def test_validate_broken_prints_one_line_per_defect(capsys):
    assert main(["validate", str(FIXTURES / "broken.fml")]) == 1
    lines = capsys.readouterr().err.splitlines()
    assert len(lines) == 4
    assert lines[0].startswith(str(FIXTURES / "broken.fml") + ":7:9: duplicate-cell: ")


def test_validate_syntax_error(capsys):
    assert main(["validate", str(FIXTURES / "syntax_error.fml")]) == 1
    assert ": syntax: " in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["validate", "nope.fml"]) == 1
    assert "cannot read" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [[], ["frobnicate"], ["validate"], ["deploy", DEMO], ["simulate", DEMO, "--horizon", "0"],
     ["simulate", DEMO, "--bogus"], ["emit", DEMO, "--stage", "xyz", "-o", "x"]],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_deploy_matches_golden_and_is_repeatable(tmp_path):
    for run in ("a", "b"):
        assert main(["deploy", DEMO, "-o", str(tmp_path / run)]) == 0
    a = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
    b = {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()}
    golden = {p.name: p.read_bytes() for p in (GOLDEN / "demo").iterdir()}
    assert a == b == golden


def test_failed_deploy_leaves_no_directory(tmp_path):
    out = tmp_path / "out"
    assert main(["deploy", str(FIXTURES / "broken.fml"), "-o", str(out)]) == 1
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_emit_from_fml_and_from_dump(tmp_path):
    assert main(["emit", DEMO, "--stage", "cam", "-o", str(tmp_path / "x")]) == 0
    names = sorted(p.name for p in (tmp_path / "x").iterdir())
    assert names == ["demo.cam.dump", "demo.cam.package_diagram.txt"]
    dump = tmp_path / "x" / "demo.cam.dump"
    assert main(["emit", str(dump), "--stage", "cam", "-o", str(tmp_path / "y")]) == 0
    assert (tmp_path / "y" / "demo.cam.dump").read_bytes() == dump.read_bytes()
    assert main(["emit", str(dump), "--stage", "oam", "-o", str(tmp_path / "z")]) == 1
    assert not (tmp_path / "z").exists()


def test_simulate_prints_kpis(capsys):
    assert main(["simulate", DEMO, "--horizon", "20", "--seed", "42"]) == 0
    assert capsys.readouterr().out == "kpi,value\nbo,0\ncost,672.0\nct,5.25\nfr,0.85\ninv,30.6\n"


def test_simulate_from_oam_dump_with_trace(tmp_path, capsys):
    dump = GOLDEN / "demo" / "demo.oam.dump"
    assert main(["simulate", str(dump), "--seed", "42", "--trace", "-o", str(tmp_path / "s")]) == 0
    files = sorted(p.name for p in (tmp_path / "s").iterdir())
    assert files == ["demo.kpi.csv", "demo.kpi.dump", "demo.trace.csv"]
    trace = (tmp_path / "s" / "demo.trace.csv").read_text().splitlines()
    assert trace[0] == "period,agent,event,qty"
    assert main(["simulate", str(GOLDEN / "demo" / "demo.cam.dump")]) == 1


def test_experiment_writes_report(tmp_path):
    out = tmp_path / "e"
    assert main(["experiment", DEMO, "--replications", "2", "--seed", "3", "-o", str(out)]) == 0
    csv = (out / "demo.experiment.csv").read_text()
    assert csv.startswith("cell,factor_assignments,kpi,mean,min,max,sd\n")
    assert (out / "demo.experiment.dump").exists()


def test_help_lists_every_flag():
    text = subprocess.run(
        [sys.executable, "-m", "famass", "simulate", "--help"], capture_output=True, text=True, check=True
    ).stdout
    for flag in ("--horizon", "--seed", "--trace", "--out"):
        assert flag in text
    text = subprocess.run(
        [sys.executable, "-m", "famass", "experiment", "--help"], capture_output=True, text=True, check=True
    ).stdout
    for flag in ("--replications", "--seed", "--out", "--parallel"):
        assert flag in text


def test_color_never_keeps_plain_output():
    env = dict(os.environ, FAMASS_COLOR="never")
    proc = subprocess.run(
        [sys.executable, "-m", "famass", "validate", str(FIXTURES / "broken.fml")],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 1 and "\x1b[" not in proc.stderr
