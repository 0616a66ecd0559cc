import heapq
from collections import defaultdict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from famass.deploy import deploy
from famass.fml import parse_fml
from famass.simrt import SimConfig, execute_protocol, init, simulate, step
from strategies import networks


def market(prices, ptype="negotiation", stock=(50, 50), plan=False):
    """Buyer b1 with one need outstanding; sellers named after ``prices`` keys."""
    sellers = sorted(prices)
    lines = ["dpa {", '  unit B "Buyer" role client', '  product P1 "Good"']
    lines.append("  block b1 unit B level execution functions [procurement]")
    for i, s in enumerate(sellers):
        lines.append(f'  unit U{i} "Seller {s}" role vendor')
        lines.append(f"  block {s} unit U{i} level execution functions [distribution]")
        lines.append(f"  relation physical {s} -> b1 product P1")
        lines.append(f"  relation informational needs_expression b1 -> {s} product P1")
        lines.append(f"  inventory {s} final_product initial {stock[i]}")
    lines.append("  inventory b1 final_product initial 0")
    lines.append("}")
    lines.append("saoa {")
    if ptype == "arbitration":
        lines.append("  mediator m0 scope [b1]")
    bind = ", ".join(f"b1 -> {s}" for s in sellers)
    lines.append(f"  protocol buy {ptype} bind [{bind}]")
    lines.append("}")
    lines.append("iaoa {")
    for s in sellers:
        if plan:
            lines.append(f"  ability {s} plan_production")
        lines.append(f"  ability {s} ship(lead_time=1, price={prices[s]})")
    lines.append("  ability b1 procure(reorder_point=0, reorder_qty=10)")
    lines.append("}")
    return deploy(parse_fml("\n".join(lines) + "\n")).oam


def run_until_accept(oam, horizon=8):
    state = simulate(oam, SimConfig(horizon=horizon))
    return [m for m in state.sent if m.performative == "accept"], state


def test_single_responder_is_accepted():
    accepts, _ = run_until_accept(market({"s1": 4}, stock=(50,)))
    assert accepts[0].receiver == "s1"


def test_lowest_price_wins():
    accepts, state = run_until_accept(market({"s1": 9, "s2": 7}))
    assert accepts[0].receiver == "s2"
    rejects = [m for m in state.sent if m.performative == "reject" and m.sender == "b1"]
    assert [m.receiver for m in rejects][:1] == ["s1"]


def test_price_tie_goes_to_smallest_id():
    accepts, _ = run_until_accept(market({"a2": 7, "a1": 7}))
    assert accepts[0].receiver == "a1"


def test_arbiter_applies_the_same_rule():
    accepts, state = run_until_accept(market({"a2": 7, "a1": 7}, ptype="arbitration"))
    assert accepts[0].sender == "m0" and accepts[0].receiver == "a1"
    informs = [m for m in state.sent if m.performative == "inform" and m.receiver == "b1"]
    assert informs and informs[0].sender == "m0"


def test_no_feasible_offer_reissues_need():
    # sellers hold too little and cannot produce: every round fails
    state = simulate(market({"s1": 3, "s2": 3}, stock=(2, 2)), SimConfig(horizon=10))
    need = state.needs[1]
    assert need.round >= 2
    assert set(need.outcomes) == {"reissued"}


def test_task_sharing_relays_an_inform():
    state = simulate(market({"s1": 3}, ptype="task_sharing", stock=(50,)), SimConfig(horizon=4))
    perfs = [m.performative for m in state.sent if m.sender == "b1"]
    assert perfs[0] == "inform"
    assert state.needs[1].supplier == "s1"


def test_execute_protocol_handles_only_its_messages():
    oam = market({"s1": 9, "s2": 7})
    state = step(init(oam, SimConfig(horizon=5)))  # period 0: b1 issues the need
    state.clock += 1
    while state.queue and state.queue[0][0] <= state.clock:
        _, _, msg = heapq.heappop(state.queue)
        state.agents[msg.receiver].inbox.append(msg)
    execute_protocol(oam.protocols[0], state)
    offers = [m for m in state.sent if m.performative == "offer"]
    assert sorted((m.sender, m.price) for m in offers) == [("s1", 9.0), ("s2", 7.0)]


# -- properties over random networks ---------------------------------------------------


def check_protocol_properties(state):
    horizon = state.cfg.horizon
    for m in state.sent:
        assert m.deliver_time > m.send_time
    for m in state.delivered:
        assert m.deliver_time > m.send_time and m.deliver_time <= state.clock

    # rounds: every (need, round) either closed or still within protocol latency of the horizon
    started = {}
    for m in state.sent:
        if m.performative in ("need", "inform") and m.need and m.sender == state.needs[m.need].initiator:
            started.setdefault((m.need, m.round), m.send_time)
    for (nid, rnd), t0 in started.items():
        need = state.needs[nid]
        closed = len(need.outcomes) > rnd
        if not closed:
            assert rnd == need.round
            assert t0 + 4 >= horizon, f"need {nid} round {rnd} silently dropped"

    # argmin with tie-break on every accept decision
    offers = defaultdict(list)
    for m in state.sent:
        if m.performative == "offer":
            offers[(m.need, m.round)].append((m.price, m.sender))
    for m in state.sent:
        if m.performative == "accept":
            assert min(offers[(m.need, m.round)])[1] == m.receiver


def check_conservation(state):
    by_period = defaultdict(list)
    for row in state.balance:
        by_period[row[0]].append(row)
    assert sorted(by_period) == list(range(state.clock))
    for rows in by_period.values():
        for _, product, initial, produced, on_hand, in_transit, consumed in rows:
            assert initial + produced == on_hand + in_transit + consumed
    assert all(q >= 0 for *_, q in state.trajectory)
    # in-transit stock equals shipments sent but not yet delivered
    open_ships = defaultdict(int)
    for m in state.sent:
        if m.performative == "ship_notice" and m.deliver_time >= state.clock:
            open_ships[m.product] += m.qty
    for product, qty in state.in_transit.items():
        assert qty == open_ships[product]


@settings(max_examples=60)
@given(networks(), st.integers(0, 2**64 - 1), st.integers(1, 40))
def test_random_networks_keep_protocol_promises(text, seed, horizon):
    state = simulate(deploy(parse_fml(text)).oam, SimConfig(horizon=horizon, seed=seed))
    check_protocol_properties(state)
    check_conservation(state)


@pytest.mark.parametrize("seed", range(5))
def test_network_fixture_properties(network, seed):
    for ptype in ("arbitration", "negotiation"):
        cfg = SimConfig(horizon=40, seed=seed, overrides={"protocol.buy_p1.type": ptype})
        state = simulate(network.oam, cfg)
        check_protocol_properties(state)
        check_conservation(state)
