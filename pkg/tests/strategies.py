"""Hypothesis strategies: random but deployable supply networks as FML text.

Networks are layered. Tier 0 holds vendors, the middle tiers hold
facilities, and the last tier holds clients. Tier k ships product Pk.
Every non-vendor picks at least one supplier in the previous tier. Needs
to those suppliers are bound to a random protocol type, or to no
protocol (direct orders).
"""

from __future__ import annotations

from hypothesis import strategies as st

PROTOCOL_CHOICES = ("negotiation", "coordination", "arbitration", "task_sharing", "communication", None)
DEMANDS = ("constant(3)", "constant(0)", "uniform(0, 6)", "normal(4, 2)", "uniform(1, 3)")


@st.composite
def networks(draw):
    tiers = [draw(st.integers(1, 2))]
    tiers += [draw(st.integers(1, 2)) for _ in range(draw(st.integers(1, 2)))]
    tiers.append(draw(st.integers(1, 2)))
    last = len(tiers) - 1

    units, blocks, relations, inventories, abilities, rules = [], [], [], [], [], []
    directives, protocols = [], []
    names: list[list[str]] = []
    for k, count in enumerate(tiers):
        role = "vendor" if k == 0 else "client" if k == last else "facility"
        tier = []
        for i in range(count):
            u = f"U{k}_{i}"
            a = f"{u}.exec"
            tier.append(a)
            units.append(f'unit {u} "{role} {k}.{i}" role {role}')
            fn = "[manufacturing, distribution]" if k < last else "[sales, procurement]"
            blocks.append(f"block {a} unit {u} level execution functions {fn}")
            if draw(st.booleans()):
                blocks.append(f"block {u}.tac unit {u} level tactical functions [procurement]")
                relations.append(f"relation informational model_exchange {a} -> {u}.tac")
        names.append(tier)

    for k in range(1, len(tiers)):
        for a in names[k]:
            sups = draw(st.lists(st.sampled_from(names[k - 1]), min_size=1, max_size=len(names[k - 1]), unique=True))
            sups.sort()
            for s in sups:
                relations.append(f"relation physical {s} -> {a} product P{k - 1}")
                relations.append(f"relation informational needs_expression {a} -> {s} product P{k - 1}")
            ptype = draw(st.sampled_from(PROTOCOL_CHOICES))
            if ptype is not None:
                pname = f"p_{a.replace('.', '_')}"
                bind = ", ".join(f"{a} -> {s}" for s in sups)
                protocols.append(f"protocol {pname} {ptype} bind [{bind}]")
                if ptype == "arbitration":
                    directives.append(f"mediator M_{a.replace('.', '_')} scope [{a}]")

    for k, tier in enumerate(names):
        for a in tier:
            fp = draw(st.integers(0, 25))
            inventories.append(f"inventory {a} final_product initial {fp}")
            if 0 < k < last:
                raw = draw(st.integers(0, 25))
                inventories.append(f"inventory {a} raw_material initial {raw}")
                if draw(st.booleans()):
                    inventories.append(f"inventory {a} wip initial {draw(st.integers(0, 5))}")
            if k < last:
                if k == 0 or draw(st.integers(0, 3)) > 0:
                    abilities.append(f"ability {a} plan_production")
                    if k > 0 and draw(st.booleans()):
                        abilities.append(f"ability {a} dispatch(rule=fifo, capacity={draw(st.integers(1, 15))})")
                lead = draw(st.integers(1, 3))
                price = draw(st.sampled_from([1, 2, 3, 5]))
                abilities.append(f"ability {a} ship(lead_time={lead}, price={price})")
            if k == last:
                abilities.append(f"ability {a} sell(demand={draw(st.sampled_from(DEMANDS))})")
            if k > 0:
                rp, rq = draw(st.integers(0, 20)), draw(st.integers(1, 30))
                abilities.append(f"ability {a} procure(reorder_point={rp}, reorder_qty={rq})")
                if draw(st.integers(0, 3)) == 0:
                    abilities.append(f"ability {a} monitor_inventory")
                    rules.append(f"rule {a} when position <= {rp} do procure")

    lines = ["dpa {"]
    lines += [f"  {x}" for x in units]
    lines += [f"  product P{k} \"product {k}\"" for k in range(last)]
    lines += [f"  {x}" for x in blocks + relations + inventories]
    lines += ["}", "saoa {"]
    lines += [f"  {x}" for x in directives + protocols]
    lines += ["}", "iaoa {"]
    lines += [f"  {x}" for x in abilities + rules]
    lines.append("}")
    return "\n".join(lines) + "\n"
