from hypothesis import given
from hypothesis import strategies as st

from famass.metamodel import (
    DecisionLevel,
    FunctionalArea,
    SpatialRole,
    SpatialUnit,
    SupplyChainBlock,
    cube_cells,
    decision_blocks,
    execution_blocks,
    validate_cube,
)

L, F = DecisionLevel, FunctionalArea


def block(id, unit="F1", level=L.TACTICAL, functions=(F.MANUFACTURING,)):
    return SupplyChainBlock(id, unit, level, tuple(functions))


def test_axes_have_four_values():
    assert len(DecisionLevel) == len(FunctionalArea) == len(SpatialRole) == 4
    assert [lvl for lvl in DecisionLevel if lvl.is_execution] == [L.EXECUTION]


def test_single_function_block_has_one_cell():
    assert cube_cells(block("b")) == {("F1", L.TACTICAL, F.MANUFACTURING)}


def test_two_functions_give_two_cells():
    assert len(cube_cells(block("b", functions=(F.PROCUREMENT, F.SALES)))) == 2


@given(st.sets(st.sampled_from(list(FunctionalArea)), min_size=1), st.sampled_from(list(DecisionLevel)))
def test_cells_match_functions(functions, level):
    b = block("b", level=level, functions=sorted(functions, key=list(F).index))
    cells = cube_cells(b)
    assert len(cells) == len(functions)
    assert {c[2] for c in cells} == functions
    assert all(c[:2] == ("F1", level) for c in cells)


def test_empty_population_is_valid():
    assert len(validate_cube([])) == 0


def test_duplicate_cell_reported_once():
    report = validate_cube([block("a"), block("b")])
    assert report.codes() == ["duplicate-cell"]
    assert report.violations[0].subject == "b"


def test_disjoint_functions_same_level_allowed():
    assert len(validate_cube([block("a"), block("b", functions=(F.SALES,))])) == 0


def test_duplicate_id_and_dangling_unit():
    units = [SpatialUnit("F1", "Plant", SpatialRole.FACILITY)]
    report = validate_cube([block("a"), block("a", functions=(F.SALES,)), block("c", unit="X9")], units)
    assert sorted(report.codes()) == ["dangling-reference", "duplicate-id"]


def test_empty_functions_flagged():
    assert validate_cube([block("a", functions=())]).codes() == ["empty-functions"]


def test_decision_execution_partition():
    blocks = [block("a"), block("b", level=L.EXECUTION), block("c", level=L.STRATEGIC)]
    assert [b.id for b in decision_blocks(blocks)] == ["a", "c"]
    assert [b.id for b in execution_blocks(blocks)] == ["b"]


@given(st.lists(st.tuples(st.sampled_from("UVW"), st.sampled_from(list(L)), st.sampled_from(list(F))), max_size=20))
def test_no_violation_iff_cells_distinct(claims):
    blocks = [block(f"b{i}", u, lvl, (fn,)) for i, (u, lvl, fn) in enumerate(claims)]
    dupes = len(claims) - len(set(claims))
    assert len(validate_cube(blocks)) == dupes
