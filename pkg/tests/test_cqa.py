from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numrepair.circuits import Circuit, encode_circuit
from numrepair.cqa import cqa, holds_in, make_query, match_tuples
from numrepair.errors import ConstraintError
from numrepair.evaluator import check
from numrepair.oracles import brute_force_cqa, random_bounded_instance
from numrepair.relational import TupleId, apply_update_set, validate_update_set
from numrepair.repair import SearchLimits, check_repair

from conftest import CASH_SALES, TOTAL_RECEIPTS, cell

CASH_SALES_100 = (2003, "Receipts", "cash sales", "det", 100)
TOTAL_220 = (2003, "Receipts", "total cash receipts", "aggr", 220)
TOTAL_250 = (2003, "Receipts", "total cash receipts", "aggr", 250)


def query(budget, values):
    return make_query(budget.instance, "CashBudget", values)


def test_match_tuples_ignores_measures(budget):
    assert match_tuples(budget.instance, query(budget, CASH_SALES_100)) == [TupleId("CashBudget", CASH_SALES)]
    other_value = query(budget, (2003, "Receipts", "cash sales", "det", 7))
    assert match_tuples(budget.instance, other_value) == [TupleId("CashBudget", CASH_SALES)]
    assert not holds_in(budget.instance, other_value)
    assert holds_in(budget.instance, query(budget, CASH_SALES_100))


def test_unmatched_query_is_false(budget):
    q = query(budget, (1999, "Receipts", "cash sales", "det", 100))
    assert match_tuples(budget.instance, q) == []
    verdict = cqa(budget.instance, budget.constraints, q, "card")
    assert verdict.answer == "false"


def test_make_query_validates(budget):
    with pytest.raises(ConstraintError):
        make_query(budget.instance, "Nope", (1,))
    with pytest.raises(ConstraintError):
        make_query(budget.instance, "CashBudget", (2003, "Receipts"))
    with pytest.raises(ConstraintError):
        make_query(budget.instance, "CashBudget", ("x", "Receipts", "cash sales", "det", 100))


@pytest.mark.parametrize(
    "values, semantics, expected",
    [
        (CASH_SALES_100, "set", "false"),
        (CASH_SALES_100, "card", "true"),
        (TOTAL_220, "card", "true"),
        (TOTAL_250, "card", "false"),
    ],
)
def test_fixture_verdicts(budget, values, semantics, expected):
    verdict = cqa(budget.instance, budget.constraints, query(budget, values), semantics, max_support=3)
    assert verdict.answer == expected


def test_falsifying_witness_is_a_minimal_repair(budget):
    inst, cs = budget.instance, budget.constraints
    q = query(budget, CASH_SALES_100)
    verdict = cqa(inst, cs, q, "set", max_support=3)
    assert verdict.witness is not None
    repaired = apply_update_set(inst, verdict.witness)
    assert check(repaired, cs).consistent
    assert not holds_in(repaired, q)
    minimality = check_repair(inst, cs, verdict.witness, "set")
    assert minimality.is_repair and minimality.is_minimal


def test_card_witness_for_wrong_total(budget):
    verdict = cqa(budget.instance, budget.constraints, query(budget, TOTAL_250), "card")
    assert [(u.cell, u.value) for u in verdict.witness] == [(cell(TOTAL_RECEIPTS), 220)]


def test_consistent_instance_answers_membership(budget):
    inst = apply_update_set(budget.instance, validate_update_set(budget.instance, [(cell(TOTAL_RECEIPTS), 220)]))
    assert cqa(inst, budget.constraints, make_query(inst, "CashBudget", TOTAL_220)).answer == "true"
    assert cqa(inst, budget.constraints, make_query(inst, "CashBudget", TOTAL_250)).answer == "false"


def test_no_repair_is_flagged():
    inst, cs = encode_circuit(Circuit(1, ((1, 1), (2,))))  # g0 = NOR(g1), g1 = NOR(x1): output is x1
    # every cell starts at -1, so the only minimal repairs change all 7 cells and set x1 = 1
    verdict = cqa(inst, cs, make_query(inst, "input", (2, 1)), "card", max_support=7)
    assert verdict.answer == "true" and not verdict.no_repair
    inst, cs = encode_circuit(Circuit(1, ((1, 2), (2,))))  # g0 = NOR(g1, x1) with g1 = NOR(x1): always 0
    verdict = cqa(inst, cs, make_query(inst, "input", (2, 0)), "card", max_support=6)
    assert verdict.answer == "false"
    assert verdict.no_repair


def test_truncated_search_is_indeterminate(budget):
    q = query(budget, (2004, "Receipts", "total cash receipts", "aggr", 200))
    verdict = cqa(budget.instance, budget.constraints, q, "set", max_support=1)
    assert verdict.answer == "indeterminate"
    assert verdict.value is None


def test_verdict_json(budget):
    verdict = cqa(budget.instance, budget.constraints, query(budget, TOTAL_250), "card")
    data = json.loads(verdict.to_json(budget.instance))
    assert data["answer"] == "false"
    assert data["query"] == "CashBudget(2003, 'Receipts', 'total cash receipts', 'aggr', 250)"
    assert data["witness"][0]["old"] == "250" and data["witness"][0]["new"] == "220"
    assert data["no_repair"] is False


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**5), row=st.integers(0, 5), delta=st.integers(-1, 1),
       semantics=st.sampled_from(["set", "card"]))
def test_cqa_agrees_with_enumeration(seed, row, delta, semantics):
    inst, cs = random_bounded_instance(seed)
    rows = inst.rows("R")
    values = list(rows[row % len(rows)])
    values[-1] = max(-5, min(5, values[-1] + delta))
    expected = brute_force_cqa(inst, cs, "R", values, semantics)
    verdict = cqa(inst, cs, make_query(inst, "R", values), semantics, limits=SearchLimits(len(inst.measure_cells())))
    assert verdict.value == (False if expected is None else expected)
    assert verdict.no_repair == (expected is None and not check(inst, cs).consistent)
