"""AST for aggregation functions and aggregate constraints.

An aggregation function sums a linear attribute expression over the rows of
one relation that satisfy a selection condition; an aggregate constraint
bounds a linear combination of such sums for every match of a conjunctive
body.  Only linear expressions are representable: there is no node for the
product of two attributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Iterator, Mapping, Optional, Union

from .relational import Value

# -- operands and attribute expressions -------------------------------------


@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class AttrRef:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Scale:
    coef: Fraction
    expr: "Expr"


Expr = Union[Const, AttrRef, Add, Sub, Scale]
Operand = Union[Const, AttrRef, Param]


def expr_attributes(e: Expr) -> set[str]:
    if isinstance(e, AttrRef):
        return {e.name}
    if isinstance(e, (Add, Sub)):
        return expr_attributes(e.left) | expr_attributes(e.right)
    if isinstance(e, Scale):
        return expr_attributes(e.expr)
    return set()


def linearize(e: Expr) -> tuple[dict[str, Fraction], Fraction]:
    """Flatten an attribute expression to ``(coefficient per attribute, constant)``."""
    if isinstance(e, Const):
        return {}, Fraction(e.value)  # type: ignore[arg-type]
    if isinstance(e, AttrRef):
        return {e.name: Fraction(1)}, Fraction(0)
    if isinstance(e, Scale):
        coeffs, const = linearize(e.expr)
        return {a: e.coef * c for a, c in coeffs.items()}, e.coef * const
    lc, lk = linearize(e.left)
    rc, rk = linearize(e.right)
    sign = 1 if isinstance(e, Add) else -1
    out = dict(lc)
    for a, c in rc.items():
        out[a] = out.get(a, Fraction(0)) + sign * c
    return {a: c for a, c in out.items() if c}, lk + sign * rk


# -- conditions -------------------------------------------------------------

CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")
NEGATED = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}
FLIPPED = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@dataclass(frozen=True)
class Cmp:
    op: str
    left: Operand
    right: Operand

    def negate(self) -> "Cmp":
        return Cmp(NEGATED[self.op], self.left, self.right)


@dataclass(frozen=True)
class And:
    items: tuple["Condition", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Condition", ...]


@dataclass(frozen=True)
class Not:
    item: "Condition"


Condition = Union[Cmp, And, Or, Not]
DNF = list[list[Cmp]]


def push_negation(cond: Condition, negate: bool = False) -> Condition:
    """Rewrite ``cond`` so that ``Not`` never occurs; negations land on comparisons."""
    if isinstance(cond, Cmp):
        return cond.negate() if negate else cond
    if isinstance(cond, Not):
        return push_negation(cond.item, not negate)
    items = tuple(push_negation(c, negate) for c in cond.items)
    if isinstance(cond, And):
        return Or(items) if negate else And(items)
    return And(items) if negate else Or(items)


def normalize_condition_dnf(cond: Optional[Condition]) -> DNF:
    """Disjunctive normal form: a list of disjuncts, each a list of comparisons.

    ``None`` (no condition) is the single empty disjunct, i.e. true.
    """
    if cond is None:
        return [[]]
    return _dnf(push_negation(cond))


def _dnf(cond: Condition) -> DNF:
    if isinstance(cond, Cmp):
        return [[cond]]
    if isinstance(cond, Or):
        out: DNF = []
        for c in cond.items:
            out.extend(_dnf(c))
        return out
    if isinstance(cond, And):
        parts = [_dnf(c) for c in cond.items]
        return [[cmp for conj in combo for cmp in conj] for combo in product(*parts)]
    raise TypeError(f"unexpected node after negation push-down: {cond!r}")


def negate_condition(cond: Optional[Condition]) -> Optional[Condition]:
    if cond is None:
        return None
    return Not(cond)


def condition_operands(cond: Optional[Condition]) -> Iterator[Operand]:
    if cond is None:
        return
    if isinstance(cond, Cmp):
        yield cond.left
        yield cond.right
    elif isinstance(cond, Not):
        yield from condition_operands(cond.item)
    else:
        for c in cond.items:
            yield from condition_operands(c)


# -- functions and constraints ----------------------------------------------


@dataclass(frozen=True)
class AggregationFunction:
    """``SELECT sum(body) FROM relation WHERE condition``, parameterised by ``params``."""

    name: str
    relation: str
    params: tuple[str, ...]
    body: Expr
    condition: Optional[Condition] = None

    @property
    def arity(self) -> int:
        return len(self.params)

    def condition_attributes(self) -> set[str]:
        return {o.name for o in condition_operands(self.condition) if isinstance(o, AttrRef)}


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Wildcard:
    pass


Term = Union[Var, Const, Wildcard]
Arg = Union[Var, Const]


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple[Term, ...]


@dataclass(frozen=True)
class AggTerm:
    coef: Fraction
    function: str
    args: tuple[Arg, ...]


@dataclass(frozen=True)
class AggregateConstraint:
    """``body => sum(coef * function(args)) cmp bound`` with ``cmp`` in ``<=, >=, =``."""

    name: str
    body: tuple[Atom, ...]
    terms: tuple[AggTerm, ...]
    cmp: str
    bound: Fraction
    named: bool = True

    def body_variables(self) -> list[str]:
        seen: list[str] = []
        for atom in self.body:
            for t in atom.terms:
                if isinstance(t, Var) and t.name not in seen:
                    seen.append(t.name)
        return seen

    def term_variables(self) -> list[str]:
        seen: list[str] = []
        for term in self.terms:
            for a in term.args:
                if isinstance(a, Var) and a.name not in seen:
                    seen.append(a.name)
        return seen


@dataclass(frozen=True)
class ConstraintSet:
    functions: Mapping[str, AggregationFunction] = field(default_factory=dict)
    constraints: tuple[AggregateConstraint, ...] = ()

    def function(self, name: str) -> AggregationFunction:
        return self.functions[name]

    def __iter__(self) -> Iterator[AggregateConstraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def to_text(self) -> str:
        return format_constraint_set(self)


def desugar_equalities(cs: ConstraintSet) -> ConstraintSet:
    """Rewrite every constraint into ``<=`` form.

    ``=`` becomes a ``<=`` and a ``>=`` constraint; ``>=`` is turned into
    ``<=`` by negating coefficients and bound.  Constraints already in ``<=``
    form are kept unchanged.
    """
    out: list[AggregateConstraint] = []
    for c in cs.constraints:
        if c.cmp == "<=":
            out.append(c)
            continue
        flipped = replace(
            c,
            terms=tuple(AggTerm(-t.coef, t.function, t.args) for t in c.terms),
            cmp="<=",
            bound=-c.bound,
        )
        if c.cmp == ">=":
            out.append(flipped)
        else:
            out.append(replace(c, name=f"{c.name}[<=]", cmp="<="))
            out.append(replace(flipped, name=f"{c.name}[>=]"))
    return ConstraintSet(cs.functions, tuple(out))


# -- pretty printing --------------------------------------------------------


def format_number(x: Fraction | int) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def format_literal(v: Value) -> str:
    if isinstance(v, str):
        return f'"{v}"' if "'" in v else f"'{v}'"
    return format_number(v)


def format_operand(o: Operand) -> str:
    if isinstance(o, Const):
        return format_literal(o.value)
    return o.name


def format_expr(e: Expr) -> str:
    if isinstance(e, Const):
        return format_literal(e.value)
    if isinstance(e, AttrRef):
        return e.name
    if isinstance(e, Scale):
        return f"{format_number(e.coef)} * ({format_expr(e.expr)})"
    right = format_expr(e.right)
    if isinstance(e.right, (Add, Sub)):
        right = f"({right})"
    op = "+" if isinstance(e, Add) else "-"
    return f"{format_expr(e.left)} {op} {right}"


def format_condition(c: Condition) -> str:
    if isinstance(c, Cmp):
        return f"{format_operand(c.left)} {c.op} {format_operand(c.right)}"
    if isinstance(c, Not):
        inner = format_condition(c.item)
        return f"not ({inner})" if isinstance(c.item, (And, Or)) else f"not {inner}"
    if isinstance(c, And):
        parts = [f"({format_condition(i)})" if isinstance(i, Or) else format_condition(i) for i in c.items]
        return " and ".join(parts)
    return " or ".join(format_condition(i) for i in c.items)


def format_function(f: AggregationFunction) -> str:
    text = f"function {f.name}({', '.join(f.params)}) on {f.relation}: sum({format_expr(f.body)})"
    if f.condition is not None:
        text += f" where {format_condition(f.condition)}"
    return text


def format_term(t: Term) -> str:
    if isinstance(t, Wildcard):
        return "_"
    if isinstance(t, Var):
        return t.name
    return format_literal(t.value)


def format_linear(terms: tuple[AggTerm, ...]) -> str:
    out = []
    for i, t in enumerate(terms):
        sign = "-" if t.coef < 0 else "+"
        mag = abs(t.coef)
        call = f"{t.function}({', '.join(format_term(a) for a in t.args)})"
        body = call if mag == 1 else f"{format_number(mag)} * {call}"
        if i == 0:
            out.append(f"-{body}" if sign == "-" else body)
        else:
            out.append(f"{sign} {body}")
    return " ".join(out)


def format_constraint(c: AggregateConstraint) -> str:
    head = f"{format_linear(c.terms)} {c.cmp} {format_number(c.bound)}"
    if c.body:
        atoms = ", ".join(f"{a.relation}({', '.join(format_term(t) for t in a.terms)})" for a in c.body)
        head = f"{atoms} -> {head}"
    if c.named:
        head = f"rule {c.name}: {head}"
    return head


def format_constraint_set(cs: ConstraintSet) -> str:
    lines = [format_function(f) for f in cs.functions.values()]
    lines.extend(format_constraint(c) for c in cs.constraints)
    return "\n".join(lines) + "\n"
