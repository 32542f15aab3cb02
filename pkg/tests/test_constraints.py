from __future__ import annotations

from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numrepair.constraints import (
    And,
    AttrRef,
    Cmp,
    Const,
    Not,
    Or,
    Var,
    Wildcard,
    desugar_equalities,
    format_condition,
    normalize_condition_dnf,
)
from numrepair.dsl import parse_constraints, parse_ground_atom
from numrepair.errors import ConstraintError, ConstraintSyntaxError
from numrepair.evaluator import check, compare, eval_condition
from numrepair.oracles import random_bounded_instance
from numrepair.project import fixture_path
from numrepair.relational import parse_schema


def a(name):
    return AttrRef(name)


def cmp(attr, op, value):
    return Cmp(op, a(attr), Const(Fraction(value)))


def test_first_fixture_constraint(budget):
    c = budget.constraints.constraints[0]
    assert c.name == "c1"
    (atom,) = c.body
    assert atom.relation == "CashBudget"
    assert atom.terms == (Var("y"), Var("x"), Wildcard(), Wildcard(), Wildcard())
    assert [(t.coef, t.function) for t in c.terms] == [(1, "chi1"), (-1, "chi1")]
    assert c.terms[0].args == (Var("x"), Var("y"), Const("det"))
    assert c.terms[1].args == (Var("x"), Var("y"), Const("aggr"))
    assert (c.cmp, c.bound) == ("=", 0)


def test_cross_relation_constraint(budget_sales):
    (c,) = budget_sales.constraints.constraints
    assert [atom.relation for atom in c.body] == ["CashBudget", "Sales"]
    assert [(t.coef, t.function) for t in c.terms] == [(1, "chi2"), (-1, "chi3")]


def test_attribute_product_rejected(budget):
    with pytest.raises(ConstraintSyntaxError, match="non-linear"):
        parse_constraints("function f() on CashBudget: sum(Value * Value)", budget.instance.schema)


@pytest.mark.parametrize(
    "text, message",
    [
        ("rule r: CashBudget(y,_,_,_,_) -> g(y) <= 1", "unknown aggregation function"),
        ("function f(x) on CashBudget: sum(Value) where Year = x\nrule r: f(z) <= 0", "does not occur"),
        ("function f() on Nope: sum(1)", "unknown relation"),
        ("function f() on CashBudget: sum(Foo)", "no attribute"),
        ("function f() on CashBudget: sum(Value) where Year = q", "neither a parameter"),
        ("function f() on CashBudget: sum(1)\nrule r: CashBudget(_,_,_,_,v) -> f() <= 1", "bound to '_'"),
    ],
)
def test_unresolved_names_rejected(budget, text, message):
    with pytest.raises(ConstraintError, match=message):
        parse_constraints(text, budget.instance.schema)


def test_syntax_error_has_position(budget):
    with pytest.raises(ConstraintSyntaxError) as info:
        parse_constraints("function f() on CashBudget: sum(Value)\nrule r: f() <=", budget.instance.schema)
    assert info.value.line == 2


def test_wildcard_not_allowed_as_argument(budget):
    with pytest.raises(ConstraintSyntaxError):
        parse_constraints(
            "function f(x) on CashBudget: sum(Value) where Year = x\nrule r: CashBudget(_,_,_,_,_) -> f(_) <= 0",
            budget.instance.schema,
        )


def test_desugar_equality_into_two_le(budget):
    out = desugar_equalities(budget.constraints)
    c1 = [c for c in out if c.name.startswith("c1")]
    assert [c.name for c in c1] == ["c1[<=]", "c1[>=]"]
    assert all(c.cmp == "<=" for c in out)
    assert [t.coef for t in c1[0].terms] == [1, -1]
    assert [t.coef for t in c1[1].terms] == [-1, 1]
    assert c1[0].bound == c1[1].bound == 0


def test_desugar_keeps_le_constraints():
    schema = parse_schema("R(A: integer measure)")
    cs = parse_constraints("function f() on R: sum(A)\nrule r: f() <= 3", schema)
    assert desugar_equalities(cs) == cs


def test_desugar_ge():
    schema = parse_schema("R(A: integer measure)")
    cs = parse_constraints("function f() on R: sum(A)\nrule r: 2 * f() >= 3", schema)
    (c,) = desugar_equalities(cs).constraints
    assert (c.cmp, c.bound, c.terms[0].coef) == ("<=", -3, -2)


def test_dnf_distributes():
    cond = And((cmp("A", "=", 1), Or((cmp("B", "=", 2), cmp("C", "=", 3)))))
    assert normalize_condition_dnf(cond) == [
        [cmp("A", "=", 1), cmp("B", "=", 2)],
        [cmp("A", "=", 1), cmp("C", "=", 3)],
    ]


def test_dnf_of_conjunction_is_one_disjunct():
    cond = And((cmp("Val", "!=", 0), cmp("Val", "!=", 1)))
    assert normalize_condition_dnf(cond) == [[cmp("Val", "!=", 0), cmp("Val", "!=", 1)]]


def test_dnf_pushes_negation():
    assert normalize_condition_dnf(Not(cmp("A", "<=", 5))) == [[cmp("A", ">", 5)]]


def test_ground_atom_literal(budget):
    rel, values = parse_ground_atom("CashBudget(2003, 'Receipts', 'cash sales', 'det', 100)", budget.instance.schema)
    assert rel == "CashBudget"
    assert values == (2003, "Receipts", "cash sales", "det", 100)
    with pytest.raises(ConstraintError):
        parse_ground_atom("CashBudget(2003)", budget.instance.schema)


@pytest.mark.parametrize("name", ["cash_budget", "cash_budget_sales"])
def test_pretty_print_round_trip(name):
    root = fixture_path(name)
    schema = parse_schema((root / "schema.txt").read_text())
    cs = parse_constraints((root / "constraints.acl").read_text(), schema)
    text = cs.to_text()
    again = parse_constraints(text, schema)
    assert again == cs
    assert again.to_text() == text


def test_circuit_constraints_round_trip():
    from numrepair.circuits import CIRCUIT_CONSTRAINTS, circuit_schema

    cs = parse_constraints(CIRCUIT_CONSTRAINTS, circuit_schema())
    assert parse_constraints(cs.to_text(), circuit_schema()) == cs


# -- properties ----------------------------------------------------------------

ATTRS = ["A", "B", "C"]
OPS = ["=", "!=", "<", "<=", ">", ">="]

comparisons = st.builds(cmp, st.sampled_from(ATTRS), st.sampled_from(OPS), st.integers(0, 2))
conditions = st.recursive(
    comparisons,
    lambda inner: st.one_of(
        st.builds(And, st.tuples(inner, inner)),
        st.builds(Or, st.tuples(inner, inner, inner)),
        st.builds(Not, inner),
    ),
    max_leaves=6,
)


@settings(max_examples=150, deadline=None)
@given(conditions)
def test_dnf_is_equivalent(cond):
    dnf = normalize_condition_dnf(cond)
    for values in product([0, 1, 2], repeat=3):
        env = dict(zip(ATTRS, values))
        lookup = env.__getitem__
        expected = eval_condition(cond, lookup, {})
        got = any(all(compare(c.op, env[c.left.name], c.right.value) for c in d) for d in dnf)
        assert got == expected, format_condition(cond)
        for d in dnf:
            for c in d:
                assert isinstance(c, Cmp)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_desugar_preserves_check(seed, data):
    inst, cs = random_bounded_instance(seed)
    cells = inst.measure_cells()
    values = {c: data.draw(st.integers(-6, 6)) for c in cells}
    moved = inst.with_values(values)
    before = check(moved, cs)
    after = check(moved, desugar_equalities(cs))
    assert before.consistent == after.consistent


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_random_constraints_round_trip(seed):
    inst, cs = random_bounded_instance(seed)
    assert parse_constraints(cs.to_text(), inst.schema) == cs
