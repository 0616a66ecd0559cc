from collections import Counter

import pytest
from hypothesis import given

from famass.analysis import InfoType
from famass.deploy import (
    AgentKind,
    DeployError,
    build_cam,
    build_domain_model,
    build_oam,
    deploy,
)
from famass.emit import dump
from famass.fml import parse_fml
from strategies import networks

TWO_BLOCKS = (
    "dpa {\n"
    '  unit F1 "Plant" role facility\n'
    '  product P1 "Part"\n'
    "  block F1.a unit F1 level execution functions [procurement]\n"
    "  block F1.b unit F1 level execution functions [manufacturing]\n"
    "  relation physical F1.a -> F1.b product P1\n"
    "}\n"
)


def test_dm_partitions_relations_by_kind(demo_model, demo):
    dm = demo.dm
    physical = Counter((r.source, r.target, r.product) for r in demo_model.dpa.relations if r.is_physical)
    info = Counter((r.source, r.target, r.info_type) for r in demo_model.dpa.relations if not r.is_physical)
    assert Counter((l.source, l.target, l.product) for l in dm.structural.physical_links) == physical
    assert Counter((l.source, l.target, l.info_type) for l in dm.dynamic.info_links) == info
    assert len(dm.structural.physical_links) == 2 and len(dm.dynamic.info_links) == 4
    assert {b.id for b in dm.structural.blocks} == {b.id for b in demo_model.dpa.blocks}


def test_empty_dpa_keeps_blocks():
    model = parse_fml('dpa {\n  unit F1 "P" role facility\n  block F1.a unit F1 level tactical functions [sales]\n}\n')
    dm = build_domain_model(model.dpa)
    assert len(dm.structural.blocks) == 1
    assert dm.structural.physical_links == () and dm.dynamic.info_links == ()


def test_one_agent_per_block_without_directives(demo):
    assert [a.name for a in demo.cam.activity_agents] == sorted(b.id for b in demo.dm.structural.blocks)
    assert len(demo.cam.physical_interactions) == len(demo.dm.structural.physical_links)
    assert len(demo.cam.informational_interactions) == len(demo.dm.dynamic.info_links)


def test_merge_drops_self_loop():
    model = parse_fml(TWO_BLOCKS + "saoa {\n  merge [F1.a, F1.b] -> F1.all\n}\n")
    cam = deploy(model).cam
    assert [a.name for a in cam.activity_agents] == ["F1.all"]
    assert cam.physical_interactions == ()


def test_mediator_adds_two_coordination_links_per_scope_member(network):
    cam = network.cam
    m1 = cam.agent("M1")
    assert m1.kind is AgentKind.MEDIATOR
    coord = [i for i in cam.informational_interactions if "M1" in (i.source, i.target)]
    assert {(i.source, i.target) for i in coord} == {("M1", "F1.plant"), ("F1.plant", "M1")}
    assert all(i.info_type is InfoType.COORDINATION for i in coord)
    assert all("M1" not in p.members for p in cam.actor_agents)


def test_split_filters_by_product(network):
    cam = network.cam
    a = [i for i in cam.informational_interactions if "F1.sched.a" in (i.source, i.target)]
    b = [i for i in cam.informational_interactions if "F1.sched.b" in (i.source, i.target)]
    assert {i.product for i in a} == {"P1"} and {i.product for i in b} == {"P2"}


def test_split_must_cover_all_interactions():
    text = TWO_BLOCKS.replace("}\n", "  relation informational coordination F1.a -> F1.b\n}\n")
    model = parse_fml(text + "saoa {\n  split F1.b -> [F1.b1 product P1]\n}\n")
    dm = build_domain_model(model.dpa)
    with pytest.raises(DeployError) as info:
        build_cam(dm, model.saoa)
    assert info.value.code == "split-uncovered"


def test_every_agent_sits_in_one_package(network):
    cam = network.cam
    members = Counter(m for p in cam.actor_agents for m in p.members)
    for a in cam.activity_agents:
        assert members[a.name] == (0 if a.kind is AgentKind.MEDIATOR else 1)


def test_societies_partition_agents(demo, network):
    for dep in (demo, network):
        oam = dep.oam
        dec = {a.name for a in oam.decision_society}
        exe = {a.name for a in oam.execution_society}
        assert not dec & exe
        assert dec | exe == {a.name for a in dep.cam.activity_agents}
    assert "M1" in {a.name for a in network.oam.decision_society}


def test_negotiation_protocol_template(demo):
    spec = next(p for p in demo.oam.protocols if p.name == "order_p1")
    assert [(s.sender, s.receiver, s.performative) for s in spec.sequence] == [
        ("initiator", "responder", "need"),
        ("responder", "initiator", "offer"),
        ("initiator", "responder", "accept|reject"),
    ]
    assert spec.initiators == ("F1.exec",) and spec.responders == ("V1.exec",)


def test_arbitration_gets_an_arbiter(network):
    spec = next(p for p in network.oam.protocols if p.name == "buy_p1")
    assert spec.arbiter == "M1" and len(spec.sequence) == 4


def test_unbound_interactions_become_informs(demo):
    bound = {(s, t) for p in demo.oam.protocols for s, t, _ in p.bindings}
    informs = {(x.source, x.target) for x in demo.oam.inform_exchanges}
    every = {(i.source, i.target) for i in demo.cam.informational_interactions}
    assert bound | informs == every and not bound & informs


def test_responsibility_links_stay_in_unit(demo):
    assert demo.oam.responsibility_links == (
        ("C1.tac", "C1.exec"),
        ("F1.tac", "F1.exec"),
        ("V1.tac", "V1.exec"),
    )


def test_behaviour_machines(demo):
    for agent in demo.oam.agents:
        states = agent.behavior.states
        assert sum(1 for s in states if s.passive and s.initial) == 1
        declared = {a.kind for a in agent.abilities}
        assert {s.ability for s in states if not s.passive} == declared
        for t in agent.behavior.transitions:
            assert t.event in ("internal", "external")
    idle = demo.oam.agent("C1.tac")
    assert len(idle.behavior.states) == 1 and idle.behavior.transitions == ()


def test_execution_only_model_without_iaoa():
    oam = deploy(parse_fml(TWO_BLOCKS)).oam
    assert oam.decision_society == ()
    assert all(len(a.behavior.states) == 1 for a in oam.agents)


@pytest.mark.parametrize(
    "iaoa, code",
    [
        ("  ability F1.a monitor_inventory\n  rule F1.a when on_hand < 3 do ship\n", "undeclared-ability"),
        ("  ability F1.a ship\n  rule F1.a when on_hand < 3 do ship\n", "unmonitored-quantity"),
        ("  ability F1.a ship\n  ability F1.a ship\n", "duplicate-ability"),
    ],
)
def test_oam_errors(iaoa, code):
    model = parse_fml(TWO_BLOCKS + "iaoa {\n" + iaoa + "}\n")
    dm = build_domain_model(model.dpa)
    with pytest.raises(DeployError) as info:
        build_oam(build_cam(dm, model.saoa), model.saoa, model.iaoa)
    assert info.value.code == code


def test_protocol_on_physical_interaction_rejected():
    model = parse_fml(TWO_BLOCKS + "saoa {\n  protocol p negotiation bind [F1.a -> F1.b]\n}\n")
    dm = build_domain_model(model.dpa)
    with pytest.raises(DeployError) as info:
        build_oam(build_cam(dm, model.saoa), model.saoa, model.iaoa)
    assert info.value.code == "protocol-physical"


def test_traceability(demo, network, demo_model, network_model):
    for dep, model in ((demo, demo_model), (network, network_model)):
        blocks = {b.id for b in model.dpa.blocks}
        for agent in dep.oam.agents:
            assert agent.directive == "mediator" or (agent.origin and set(agent.origin) <= blocks)
        # every DM physical link lands in exactly one CAM physical interaction (or was absorbed by a merge)
        hits = Counter(o for it in dep.cam.physical_interactions for o in it.origins)
        for link in dep.dm.structural.physical_links:
            assert hits[link.origin] <= 1
    assert len(demo.cam.physical_interactions) == 2
    # network: F1.store -> F1.line is internal to the merged F1.plant
    assert len(network.cam.physical_interactions) == 3


@given(networks())
def test_deploy_is_deterministic(text):
    a, b = deploy(parse_fml(text)), deploy(parse_fml(text))
    assert a == b
    for x, y in ((a.dm, b.dm), (a.cam, b.cam), (a.oam, b.oam)):
        assert dump(x) == dump(y)
