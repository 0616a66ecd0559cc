import pytest

from conftest import GOLDEN
from famass.analysis import DpaSection
from famass.deploy import build_domain_model, deploy
from famass.emit import (
    Artifact,
    deployment_files,
    dump,
    emit_behavior_and_protocols,
    emit_class_artifacts,
    emit_package_diagram,
    load,
    render_files,
    write_files,
)
from famass.fml import parse_fml

# one golden per modelling rule: (rule, fixture, golden file)
RULE_GOLDENS = [
    ("levels-as-stereotypes", "demo", "demo.dm.class_diagram.txt"),
    ("decoupling-point-in-class-name", "demo", "demo.dm.class_table.txt"),
    ("objects-on-links", "network", "network.cam.package_diagram.txt"),
    ("actor-agent-packages", "demo", "demo.cam.package_diagram.txt"),
    ("two-societies", "network", "network.oam.package_diagram.txt"),
    ("protocol-sequence-template", "network", "network.oam.protocol_diagram.txt"),
    ("negotiation-sequence", "demo", "demo.oam.protocol_diagram.txt"),
    ("agent-behaviour", "demo", "demo.oam.activity_diagram.txt"),
]


def files_of(request, fixture):
    dep = request.getfixturevalue(fixture)
    return deployment_files(dep, fixture)


@pytest.mark.parametrize("rule, fixture, golden", RULE_GOLDENS, ids=[r[0] for r in RULE_GOLDENS])
def test_rule_golden(request, rule, fixture, golden):
    expected = (GOLDEN / fixture / golden).read_bytes()
    assert files_of(request, fixture)[golden].encode("utf-8") == expected


@pytest.mark.parametrize("fixture", ["demo", "network"])
def test_whole_golden_directory(request, fixture):
    files = files_of(request, fixture)
    on_disk = {p.name: p.read_text(encoding="utf-8") for p in (GOLDEN / fixture).iterdir()}
    assert files == on_disk


def test_stereotype_and_decoupling_marker(demo):
    diagram, table = emit_class_artifacts(demo.dm)
    assert '"«tactical»\\nF1.tac' in diagram.body
    assert "F1.exec <DP>" in diagram.body
    row = next(r for r in table.body.splitlines() if r.startswith("F1.exec"))
    assert row.startswith("F1.exec <DP>\t") and row.endswith("\tyes")
    assert "raw_material=30" in row


def test_empty_dm_gives_header_only_outputs():
    diagram, table = emit_class_artifacts(build_domain_model(DpaSection()))
    assert diagram.body == 'digraph "dm" {\n  graph [rankdir=LR];\n  node [shape=box];\n}\n'
    assert table.body.count("\n") == 1  # header row only


def test_single_unit_package():
    model = parse_fml(
        'dpa {\n  unit F1 "P" role facility\n'
        "  block F1.a unit F1 level tactical functions [sales]\n"
        "  block F1.b unit F1 level execution functions [sales]\n}\n"
    )
    body = emit_package_diagram(deploy(model).cam).body
    assert body.count("subgraph") == 1
    assert body.count("activity-agent»") == 2


def test_physical_edge_carries_product_box(demo):
    body = emit_package_diagram(demo.cam).body
    assert '"V1.exec" -> "F1.exec" [style=solid, label="[P1]"];' in body


def test_mediator_outside_packages(network):
    body = emit_package_diagram(network.cam).body
    top = [l for l in body.splitlines() if l.startswith('  "M1" [')]
    assert len(top) == 1


def test_artifact_count(demo, network):
    for dep in (demo, network):
        arts = emit_behavior_and_protocols(dep.oam)
        assert len(arts) == len(dep.oam.agents) + len(dep.oam.protocols)
        assert all(isinstance(a, Artifact) and a.target == "oam" for a in arts)


def test_idle_agent_has_single_passive_state(demo):
    arts = {a.subject: a for a in emit_behavior_and_protocols(demo.oam)}
    lines = arts["V1.tac"].body.splitlines()
    assert [l for l in lines if l.startswith("state")] == ["state waiting [passive, initial]"]
    assert not any(l.startswith("transition") for l in lines)


@pytest.mark.parametrize("fixture", ["demo", "network"])
def test_dump_round_trip_is_byte_identical(request, fixture):
    dep = request.getfixturevalue(fixture)
    for stage_model in (dep.dm, dep.cam, dep.oam):
        text = dump(stage_model, fixture)
        stage, name, back = load(text)
        assert back == stage_model and name == fixture
        assert dump(back, fixture) == text
        assert text.endswith("\n") and "\r" not in text


def test_render_from_loaded_dump_matches(demo):
    _, _, oam = load(dump(demo.oam, "demo"))
    assert render_files(oam, "demo") == render_files(demo.oam, "demo")


def test_write_files_creates_directory(tmp_path, demo):
    out = tmp_path / "nested" / "out"
    write_files(out, deployment_files(demo, "demo"))
    assert len(list(out.iterdir())) == 9
    assert not [p for p in out.parent.iterdir() if p.name.startswith(".")]
