"""Grounding of aggregate constraints and the consistency check ``D |= AC``.

Sums over an empty selection are 0 (SQL would return NULL).  Groundings are
computed on the instance at hand; since measure positions of constraint
bodies are wildcard-only, repairs never change them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional

from .constraints import (
    AggregateConstraint,
    AggregationFunction,
    And,
    AttrRef,
    Cmp,
    Condition,
    ConstraintSet,
    Const,
    Not,
    Or,
    Param,
    Var,
    Wildcard,
    condition_operands,
    expr_attributes,
    format_number,
    linearize,
)
from .errors import EvaluationError
from .relational import Instance, Schema, TupleId, Value, coerce_value, format_value


def compare(op: str, a: Value, b: Value) -> bool:
    """Compare two values; strings and numbers are never equal to each other."""
    a_num = not isinstance(a, str)
    b_num = not isinstance(b, str)
    if a_num != b_num:
        if op == "=":
            return False
        if op == "!=":
            return True
        raise EvaluationError(f"cannot order {a!r} and {b!r}: mixed string and number")
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b  # type: ignore[operator]
    if op == "<=":
        return a <= b  # type: ignore[operator]
    if op == ">":
        return a > b  # type: ignore[operator]
    if op == ">=":
        return a >= b  # type: ignore[operator]
    raise ValueError(f"unknown comparison operator {op!r}")


def eval_condition(
    cond: Optional[Condition],
    lookup: Callable[[str], Value],
    params: Mapping[str, Value],
) -> bool:
    """Evaluate ``cond`` with attribute values from ``lookup`` and bound parameters."""
    if cond is None:
        return True
    if isinstance(cond, Cmp):
        return compare(cond.op, _operand(cond.left, lookup, params), _operand(cond.right, lookup, params))
    if isinstance(cond, Not):
        return not eval_condition(cond.item, lookup, params)
    if isinstance(cond, And):
        return all(eval_condition(c, lookup, params) for c in cond.items)
    if isinstance(cond, Or):
        return any(eval_condition(c, lookup, params) for c in cond.items)
    raise TypeError(f"not a condition: {cond!r}")


def _operand(o, lookup, params) -> Value:
    if isinstance(o, Const):
        return o.value
    if isinstance(o, AttrRef):
        return lookup(o.name)
    return params[o.name]


def param_domains(function: AggregationFunction, schema: Schema) -> dict[str, Optional[str]]:
    """Domain of each parameter, taken from the attribute it is compared with."""
    rel = schema[function.relation]
    out: dict[str, Optional[str]] = {p: None for p in function.params}

    def visit(c):
        if c is None:
            return
        if isinstance(c, Cmp):
            for p, other in ((c.left, c.right), (c.right, c.left)):
                if isinstance(p, Param) and isinstance(other, AttrRef) and out[p.name] is None:
                    out[p.name] = rel.attribute(other.name).domain
        elif isinstance(c, Not):
            visit(c.item)
        else:
            for i in c.items:
                visit(i)

    visit(function.condition)
    return out


def bind_params(function: AggregationFunction, schema: Schema, args: Iterable[Value]) -> dict[str, Value]:
    args = tuple(args)
    if len(args) != function.arity:
        raise EvaluationError(f"{function.name} takes {function.arity} arguments, got {len(args)}")
    domains = param_domains(function, schema)
    bound = {}
    for p, v in zip(function.params, args):
        dom = domains[p]
        if dom is not None:
            try:
                v = coerce_value(dom, v)
            except ValueError:
                pass
        bound[p] = v
    return bound


def selected_rows(instance: Instance, function: AggregationFunction, args: Iterable[Value]) -> list[TupleId]:
    """Tuples of the function's relation satisfying its condition for ``args``."""
    rel = instance.schema[function.relation]
    params = bind_params(function, instance.schema, args)
    out = []
    for i, row in enumerate(instance.rows(rel.name)):
        if eval_condition(function.condition, lambda a: row[rel.index(a)], params):
            out.append(TupleId(rel.name, i))
    return out


def eval_aggregation(instance: Instance, function: AggregationFunction, args: Iterable[Value]) -> Fraction:
    """``SELECT sum(e) FROM R WHERE alpha(args)`` as an exact rational; empty sum is 0."""
    rel = instance.schema[function.relation]
    coeffs, const = linearize(function.body)
    total = Fraction(0)
    for tid in selected_rows(instance, function, args):
        row = instance.row(tid)
        total += const
        for attr, c in coeffs.items():
            total += c * row[rel.index(attr)]
    return total


def value_sort_key(v: Value) -> tuple:
    return (1, v) if isinstance(v, str) else (0, Fraction(v))


@dataclass(frozen=True)
class GroundTerm:
    coef: Fraction
    function: str
    args: tuple[Value, ...]


@dataclass(frozen=True)
class GroundConstraint:
    """One instantiation of an aggregate constraint under a substitution ``theta``."""

    constraint: str
    theta: tuple[tuple[str, Value], ...]
    terms: tuple[GroundTerm, ...]
    cmp: str
    bound: Fraction

    def theta_dict(self) -> dict[str, Value]:
        return dict(self.theta)

    def sort_key(self) -> tuple:
        return (self.constraint, tuple(value_sort_key(v) for _, v in self.theta))

    def label(self) -> str:
        if not self.theta:
            return self.constraint
        return f"{self.constraint}({', '.join(f'{k}={format_value(v)}' for k, v in self.theta)})"


def _matches(instance: Instance, atoms, binding: dict[str, Value]) -> Iterable[dict[str, Value]]:
    if not atoms:
        yield binding
        return
    atom, rest = atoms[0], atoms[1:]
    rel = instance.schema[atom.relation]
    for row in instance.rows(atom.relation):
        b = dict(binding)
        ok = True
        for attr, term, value in zip(rel.attributes, atom.terms, row):
            if isinstance(term, Wildcard):
                continue
            if isinstance(term, Const):
                try:
                    want = coerce_value(attr.domain, term.value)
                except ValueError:
                    ok = False
                    break
                if want != value:
                    ok = False
                    break
            elif isinstance(term, Var):
                if term.name in b:
                    if b[term.name] != value or isinstance(b[term.name], str) != isinstance(value, str):
                        ok = False
                        break
                else:
                    b[term.name] = value
        if ok:
            yield from _matches(instance, rest, b)


def ground_constraint(instance: Instance, constraint: AggregateConstraint) -> list[GroundConstraint]:
    """All ground instances of ``constraint`` whose body is true on ``instance``.

    Substitutions that agree on the variables used in aggregation arguments
    are collapsed; the result is sorted by substitution values.
    """
    used = constraint.term_variables()
    seen: set[tuple] = set()
    out = []
    for binding in _matches(instance, list(constraint.body), {}):
        theta = tuple((v, binding[v]) for v in used)
        key = tuple((v, value_sort_key(x)) for v, x in theta)
        if key in seen:
            continue
        seen.add(key)
        terms = tuple(
            GroundTerm(
                t.coef,
                t.function,
                tuple(binding[a.name] if isinstance(a, Var) else a.value for a in t.args),
            )
            for t in constraint.terms
        )
        out.append(GroundConstraint(constraint.name, theta, terms, constraint.cmp, constraint.bound))
    out.sort(key=GroundConstraint.sort_key)
    return out


def ground_all(instance: Instance, cs: ConstraintSet) -> list[GroundConstraint]:
    out = []
    for c in cs.constraints:
        out.extend(ground_constraint(instance, c))
    return out


def lhs_value(instance: Instance, cs: ConstraintSet, g: GroundConstraint) -> Fraction:
    return sum(
        (t.coef * eval_aggregation(instance, cs.function(t.function), t.args) for t in g.terms),
        Fraction(0),
    )


def holds(lhs: Fraction, cmp: str, bound: Fraction) -> bool:
    if cmp == "<=":
        return lhs <= bound
    if cmp == ">=":
        return lhs >= bound
    if cmp == "=":
        return lhs == bound
    raise ValueError(f"unknown constraint comparator {cmp!r}")


@dataclass(frozen=True)
class Violation:
    ground: GroundConstraint
    lhs: Fraction

    @property
    def satisfied(self) -> bool:
        return holds(self.lhs, self.ground.cmp, self.ground.bound)

    def to_dict(self) -> dict:
        return {
            "constraint": self.ground.constraint,
            "theta": {k: _json_value(v) for k, v in self.ground.theta},
            "lhs": format_number(self.lhs),
            "cmp": self.ground.cmp,
            "k": format_number(self.ground.bound),
        }


def _json_value(v: Value):
    if isinstance(v, Fraction):
        return format_number(v)
    return v


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...]
    ground_count: int

    @property
    def consistent(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def summary(self) -> dict:
        return {"ground_constraints": self.ground_count, "violated": len(self.violations)}

    def to_json(self) -> str:
        return json.dumps(
            {"summary": self.summary(), "violations": [v.to_dict() for v in self.violations]}, indent=2
        )

    def to_table(self) -> str:
        if not self.violations:
            return f"consistent: {self.ground_count} ground constraints satisfied"
        lines = [f"{len(self.violations)} of {self.ground_count} ground constraints violated"]
        for v in self.violations:
            g = v.ground
            lines.append(f"  {g.label()}: lhs {format_number(v.lhs)} {g.cmp} {format_number(g.bound)} fails")
        return "\n".join(lines)


def check(instance: Instance, cs: ConstraintSet) -> ViolationReport:
    """Evaluate every ground constraint; the report lists exactly the violated ones."""
    grounds = ground_all(instance, cs)
    violations = []
    for g in grounds:
        lhs = lhs_value(instance, cs, g)
        if not holds(lhs, g.cmp, g.bound):
            violations.append(Violation(g, lhs))
    violations.sort(key=lambda v: v.ground.sort_key())
    return ViolationReport(tuple(violations), len(grounds))


def is_consistent(instance: Instance, cs: ConstraintSet) -> bool:
    return check(instance, cs).consistent


def referenced_attributes(function: AggregationFunction) -> set[str]:
    """Attributes the function reads, in its body or its condition."""
    return expr_attributes(function.body) | {
        o.name for o in condition_operands(function.condition) if isinstance(o, AttrRef)
    }
