import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from famass.analysis import AbilityKind, Distribution, InfoType, Merge, Split, StockKind
from famass.fml import (
    DanglingReference,
    DuplicateId,
    FmlError,
    FmlSyntaxError,
    UnknownKeyword,
    parse_file,
    parse_fml,
    serialize,
)
from famass.fml.lexer import tokenize
from strategies import networks

ALL_FIXTURES = sorted(FIXTURES.glob("*.fml"))
PARSEABLE = [p for p in ALL_FIXTURES if p.name != "syntax_error.fml"]


def test_tokens_carry_positions():
    toks = tokenize('dpa {\n  unit F1 "Plant" role facility\n}\n')
    unit = next(t for t in toks if t.value == "unit")
    assert (unit.line, unit.col) == (2, 3)
    assert any(t.kind == "STRING" and t.value == "Plant" for t in toks)


def test_comments_crlf_and_bom_are_ignored():
    text = '\ufeffdpa { # units\r\n  unit F1 "Plant" role facility # trailing\r\n}\r\n'
    model = parse_fml(text)
    assert [u.id for u in model.dpa.units] == ["F1"]


def test_demo_contents(demo_model):
    dpa = demo_model.dpa
    assert len(dpa.blocks) == 6 and len(dpa.relations) == 6
    assert dpa.decoupling_point == "F1.exec"
    assert dpa.relations[2].info_type is InfoType.NEEDS_EXPRESSION
    assert dpa.inventories[1].stock_kind is StockKind.RAW_MATERIAL
    sell = next(a for a in demo_model.iaoa.abilities if a.kind is AbilityKind.SELL)
    assert sell.param("demand") == Distribution("constant", (4,))
    rule = demo_model.iaoa.responses[0]
    assert (rule.quantity, rule.op, rule.threshold, rule.action) == ("position", "<=", 10, AbilityKind.PROCURE)
    assert [f.name for f in demo_model.gpa.factors] == ["client_rp", "client_demand"]


def test_directives_parse(network_model):
    kinds = [type(d).__name__ for d in network_model.saoa.directives]
    assert kinds == ["Merge", "Merge", "Split", "Mediator"]
    split = network_model.saoa.directives[2]
    assert isinstance(split, Split) and [p.key for p in split.parts] == ["P1", "P2"]
    assert isinstance(network_model.saoa.directives[0], Merge)


@pytest.mark.parametrize(
    "text, cls, pos",
    [
        ("dpa {\n  warehouse W1\n}\n", UnknownKeyword, (2, 3)),
        ("foo {\n}\n", UnknownKeyword, (1, 1)),
        ('dpa {\n  unit F1 "a" role facility\n  unit F1 "b" role client\n}\n', DuplicateId, (3, 8)),
        ('dpa {\n  unit F1 "a" role pirate\n}\n', UnknownKeyword, (2, 20)),
        ('gpa {\n  objective "open\n}\n', FmlSyntaxError, (2, 13)),
        ("saoa {\n  protocol p grouping bind [a -> b]\n}\n", UnknownKeyword, (2, 14)),
        ("dpa {\n  unit\n}\n", FmlSyntaxError, (2, 7)),
    ],
)
def test_errors_are_located(text, cls, pos):
    with pytest.raises(cls) as info:
        parse_fml(text, "m.fml")
    assert (info.value.line, info.value.col) == pos
    assert info.value.format("m.fml").startswith(f"m.fml:{pos[0]}:{pos[1]}: {cls.code}: ")


def test_all_dangling_references_reported_in_order():
    text = (
        "dpa {\n"
        '  unit F1 "a" role facility\n'
        "  block F1.x unit F9 level tactical functions [sales]\n"
        "  decoupling ZZ\n"
        "}\n"
    )
    with pytest.raises(DanglingReference) as info:
        parse_fml(text)
    assert [(e.line, e.symbol) for e in info.value.errors] == [(3, "F9"), (4, "ZZ")]


def test_syntax_fixture_fails(tmp_path):
    with pytest.raises(FmlError) as info:
        parse_file(FIXTURES / "syntax_error.fml")
    assert info.value.code == "syntax"


@pytest.mark.parametrize("path", PARSEABLE, ids=lambda p: p.name)
def test_fixture_round_trip(path):
    model = parse_file(path)
    text = serialize(model)
    again = parse_fml(text)
    assert again == model
    assert serialize(again) == text


@given(networks())
def test_generated_round_trip(text):
    model = parse_fml(text)
    out = serialize(model)
    assert parse_fml(out) == model
    assert serialize(parse_fml(out)) == out


names = st.text(st.characters(codec="utf-8", exclude_categories=("Cs", "Cc")), max_size=12)


@given(names, st.lists(names, max_size=3))
def test_free_text_survives_round_trip(objective, questions):
    body = [f"  objective {_quote(objective)}"] + [f"  question {_quote(q)}" for q in questions]
    model = parse_fml("gpa {\n" + "\n".join(body) + "\n}\n")
    assert model.gpa.objective == objective
    assert list(model.gpa.questions) == questions
    assert parse_fml(serialize(model)) == model


def _quote(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'
