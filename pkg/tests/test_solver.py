from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numrepair.linear import encode_support
from numrepair.linsys import LinearSystem, Row
from numrepair.oracles import fm_feasible, grid_feasible, random_system, reference_feasible
from numrepair.solver import (
    BoundExhausted,
    Feasible,
    Infeasible,
    SolverConfig,
    default_box,
    dump_result,
    solve,
    verify,
)

from conftest import TOTAL_RECEIPTS, cell


def system(variables, rows):
    s = LinearSystem()
    for name, domain in variables.items():
        s.add_variable(name, domain)
    for coeffs, op, bound in rows:
        s.add(Row.make(coeffs, op, bound))
    return s


def test_forced_equality():
    s = system({"x": "real"}, [({"x": 1}, "<=", 3), ({"x": -1}, "<=", -3)])
    result = solve(s)
    assert isinstance(result, Feasible)
    assert result.assignment == {"x": 3}


def test_contradiction_has_certificate():
    s = system({"x": "real"}, [({"x": 1}, "<=", 2), ({"x": -1}, "<=", -3)])
    result = solve(s)
    assert isinstance(result, Infeasible)
    assert result.certificate.check(s.rows)
    assert result.certificate.describe(s.rows) == "0 <= -1"


def test_strict_rows_without_epsilon():
    # 0 < x < 1/1000000 is feasible over the reals, empty over the integers
    tiny = Fraction(1, 10**6)
    real = system({"x": "real"}, [({"x": 1}, "<", tiny), ({"x": -1}, "<", 0)])
    result = solve(real)
    assert isinstance(result, Feasible)
    assert 0 < result.assignment["x"] < tiny
    integer = system({"x": "integer"}, [({"x": 1}, "<", 1), ({"x": -1}, "<", 0)])
    assert isinstance(solve(integer), Infeasible)


def test_strict_contradiction():
    s = system({"x": "real", "y": "real"}, [({"x": 1, "y": -1}, "<", 0), ({"x": -1, "y": 1}, "<=", 0)])
    result = solve(s)
    assert isinstance(result, Infeasible)
    assert result.certificate.describe(s.rows) == "0 < 0"


def test_integer_gap():
    # 2x = 1 has a real but no integer solution
    s = system({"x": "integer"}, [({"x": 2}, "=", 1)])
    assert isinstance(solve(s), Infeasible)
    s = system({"x": "integer", "y": "integer"}, [({"x": 3, "y": 5}, "=", 1), ({"x": 1}, ">=", 0)])
    result = solve(s)
    assert isinstance(result, Feasible) and verify(s, result.assignment)


def test_bound_exhausted_is_distinct():
    # feasible only far outside a box of 3
    s = system({"x": "integer", "y": "real"}, [({"x": 1, "y": -1}, ">=", 100), ({"y": 1}, ">=", 0),
                                              ({"x": 3}, "<", 400)])
    result = solve(s, SolverConfig(box=3))
    assert isinstance(result, BoundExhausted)
    assert result.feasible is None
    assert isinstance(solve(s), Feasible)


def test_cash_budget_support_system(budget):
    (s,) = encode_support(budget.instance, budget.constraints, [cell(TOTAL_RECEIPTS)]).systems
    result = solve(s)
    assert result.assignment == {cell(TOTAL_RECEIPTS): 220}
    assert isinstance(result.assignment[cell(TOTAL_RECEIPTS)], Fraction)


def test_verify():
    s = system({"x": "real"}, [({"x": 1}, "<=", 3)])
    assert verify(s, {"x": 3})
    assert not verify(s, {"x": 4})
    with pytest.raises(KeyError):
        verify(s, {})


def test_verify_checks_integrality():
    s = system({"x": "integer"}, [({"x": 1}, "<=", 3)])
    assert not verify(s, {"x": Fraction(1, 2)})


def test_default_box_scales_rows():
    s = system({"x": "integer"}, [({"x": Fraction(1, 9)}, "<=", -9)])
    # row scaled to x <= -81: 2 * (1 + 1 + 81)
    assert default_box(s) == 166


def test_dump_result_json():
    s = system({"x": "real"}, [({"x": 1}, "<=", 2), ({"x": -1}, "<=", -3)])
    data = json.loads(dump_result(solve(s)))
    assert data["status"] == "infeasible"
    assert data["certificate"] == {"0": "1", "1": "1"}
    data = json.loads(dump_result(solve(system({"x": "real"}, [({"x": 1}, "=", Fraction(5, 2))]))))
    assert data == {"status": "feasible", "witness": {"x": "5/2"}}


def test_row_normalisation():
    r = Row.make({"x": 2, "y": 0}, ">", 4)
    assert (dict(r.coeffs), r.op, r.bound) == ({"x": -2}, "<", -4)
    with pytest.raises(ValueError):
        Row({"x": 1}, ">=", Fraction(0))


# -- properties ----------------------------------------------------------------

seeds = st.integers(0, 10**6)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_agrees_with_reference(seed):
    s = random_system(random.Random(seed))
    result = solve(s)
    assert not isinstance(result, BoundExhausted)
    assert result.feasible == reference_feasible(s)
    if isinstance(result, Feasible):
        assert verify(s, result.assignment)
    else:
        if result.certificate is not None:
            assert result.certificate.check(s.rows)


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_integer_systems_agree_with_grid(seed):
    rng = random.Random(seed)
    s = random_system(rng, max_vars=3, max_rows=4)
    ints = LinearSystem({k: v.__class__("integer", v.original) for k, v in s.variables.items()}, [])
    for r in s.rows:
        ints.add(r)
    for k in ints.variables:
        ints.add(Row.make({k: 1}, "<=", 5))
        ints.add(Row.make({k: -1}, "<=", 5))
    assert solve(ints).feasible == (grid_feasible(ints) is not None)


@settings(max_examples=100, deadline=None)
@given(seeds, st.fractions(min_value=Fraction(1, 50), max_value=50))
def test_positive_scaling_keeps_decision(seed, factor):
    s = random_system(random.Random(seed))
    scaled = LinearSystem(dict(s.variables), [r.scaled(factor) for r in s.rows])
    assert solve(s).feasible == solve(scaled).feasible


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_real_decision_matches_elimination(seed):
    rng = random.Random(seed)
    s = random_system(rng)
    real = LinearSystem({k: v.__class__("real", v.original) for k, v in s.variables.items()}, list(s.rows))
    assert solve(real).feasible == fm_feasible(real.rows)
