from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numrepair.errors import InvalidUpdateError, LoadError, SchemaError
from numrepair.relational import (
    CellRef,
    TupleId,
    Update,
    UpdateSet,
    apply_update_set,
    load_instance,
    make_instance,
    parse_schema,
    parse_value,
    validate_update_set,
)

from conftest import CASH_SALES, TOTAL_RECEIPTS, cell


def test_fixture_loads_twenty_tuples(budget):
    inst = budget.instance
    assert inst.size() == 20
    rel = inst.schema["CashBudget"]
    assert rel.arity == 5
    assert rel.measures == ("Value",)
    assert inst.value(cell(TOTAL_RECEIPTS)) == 250
    assert inst.row(TupleId("CashBudget", CASH_SALES)) == (2003, "Receipts", "cash sales", "det", 100)


def test_empty_table_gives_empty_relation(tmp_path):
    (tmp_path / "R.csv").write_text("A,B\n")
    inst = load_instance("R(A: integer, B: real measure)", {"R": tmp_path / "R.csv"})
    assert inst.rows("R") == ()
    assert inst.measure_cells() == []


def test_bad_integer_names_row_and_column(tmp_path):
    (tmp_path / "R.csv").write_text("A,B\n1,2\n2,abc\n")
    with pytest.raises(LoadError, match=r"R row 1, column B"):
        load_instance("R(A: integer, B: integer measure)", {"R": tmp_path / "R.csv"})


def test_missing_table_file(tmp_path):
    with pytest.raises(LoadError):
        load_instance("R(A: integer)", {"R": tmp_path / "missing.csv"})


def test_header_must_match_schema(tmp_path):
    (tmp_path / "R.csv").write_text("B,A\n1,2\n")
    with pytest.raises(LoadError, match="header"):
        load_instance("R(A: integer, B: integer)", {"R": tmp_path / "R.csv"})


def test_real_values_accept_rationals(tmp_path):
    (tmp_path / "R.csv").write_text('K,V\n"a b",3/4\nc,0.5\n')
    inst = load_instance("R(K: string, V: real measure)", {"R": tmp_path / "R.csv"})
    assert inst.rows("R") == (("a b", Fraction(3, 4)), ("c", Fraction(1, 2)))


@pytest.mark.parametrize(
    "text",
    [
        "R(A: string measure)",  # measures must be numerical
        "R(A: integer, A: real)",  # duplicate attribute
        "R(A: integer)\nR(B: integer)",  # duplicate relation
        "R(A: float)",  # unknown domain
    ],
)
def test_schema_invariants(text):
    with pytest.raises(SchemaError):
        parse_schema(text)


def test_integer_domain_rejects_fractions():
    assert parse_value("integer", "4/2") == 2
    with pytest.raises(ValueError):
        parse_value("integer", "1/2")


def test_valid_update(budget):
    u = validate_update_set(budget.instance, [(cell(CASH_SALES), 130)])
    assert u.support == {cell(CASH_SALES)}
    assert len(u) == 1


def test_duplicate_cell_rejected(budget):
    with pytest.raises(InvalidUpdateError, match="not a consistent database update"):
        validate_update_set(budget.instance, [(cell(CASH_SALES), 130), (cell(CASH_SALES), 140)])


def test_non_measure_target_rejected(budget):
    with pytest.raises(InvalidUpdateError):
        validate_update_set(budget.instance, [(CellRef("CashBudget", CASH_SALES, "Section"), "X")])


def test_unchanged_value_rejected(budget):
    with pytest.raises(InvalidUpdateError):
        validate_update_set(budget.instance, [(cell(CASH_SALES), 100)])


def test_domain_checked(budget):
    with pytest.raises(InvalidUpdateError):
        validate_update_set(budget.instance, [(cell(CASH_SALES), Fraction(1, 2))])


def test_row_out_of_range(budget):
    with pytest.raises(InvalidUpdateError):
        validate_update_set(budget.instance, [(cell(25), 1)])


def test_apply_single_update(budget):
    inst = budget.instance
    u = validate_update_set(inst, [(cell(CASH_SALES), 130)])
    new = apply_update_set(inst, u)
    assert new.row(TupleId("CashBudget", CASH_SALES)) == (2003, "Receipts", "cash sales", "det", 130)
    # the input instance is untouched
    assert inst.value(cell(CASH_SALES)) == 100


def test_apply_empty_update_is_identity(budget):
    assert apply_update_set(budget.instance, UpdateSet()) == budget.instance


def test_apply_repair_replaces_250(budget):
    inst = budget.instance
    new = apply_update_set(inst, validate_update_set(inst, [(cell(TOTAL_RECEIPTS), 220)]))
    changed = [c for c in inst.measure_cells() if inst.value(c) != new.value(c)]
    assert changed == [cell(TOTAL_RECEIPTS)]
    assert new.value(cell(TOTAL_RECEIPTS)) == 220


def test_duplicate_rows_are_distinct_tuples():
    schema = parse_schema("R(K: integer, V: integer measure)")
    inst = make_instance(schema, {"R": [(1, 5), (1, 5)]})
    assert inst.tuple_ids("R") == [TupleId("R", 0), TupleId("R", 1)]
    assert len(inst.measure_cells()) == 2


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_apply_then_revert_is_identity(budget, data):
    inst = budget.instance
    cells = data.draw(st.lists(st.sampled_from(inst.measure_cells()), unique=True, max_size=5))
    updates = []
    for c in cells:
        v = data.draw(st.integers(-500, 500).filter(lambda x, c=c: x != inst.value(c)))
        updates.append(Update(c, v))
    u = validate_update_set(inst, updates)
    new = apply_update_set(inst, u)
    assert len(u.support) == len(u)
    for rel in inst.schema.relations:
        keys = [i for i, a in enumerate(rel.attributes) if not a.measure]
        for old_row, new_row in zip(inst.rows(rel.name), new.rows(rel.name)):
            assert [old_row[i] for i in keys] == [new_row[i] for i in keys]
    back = UpdateSet(tuple(Update(c, inst.value(c)) for c in u.support))
    assert apply_update_set(new, back) == inst
