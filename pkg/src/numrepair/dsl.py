"""Tokenizer and recursive-descent parser for the constraint language.

Example::

    function chi1(x, y, z) on CashBudget: sum(Value) where Section = x and Year = y and Type = z
    rule c1: CashBudget(y, x, _, _, _) -> chi1(x, y, 'det') - chi1(x, y, 'aggr') = 0

Numbers are decimals or ``p/q`` rationals, strings use single or double
quotes, ``#`` starts a comment.  The body (``atoms ->``) of a constraint may
be omitted, which makes it a single ground constraint.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .constraints import (
    Add,
    AggregateConstraint,
    AggregationFunction,
    AggTerm,
    And,
    Arg,
    Atom,
    AttrRef,
    Cmp,
    Condition,
    ConstraintSet,
    Const,
    Expr,
    Not,
    Operand,
    Or,
    Param,
    Scale,
    Sub,
    Term,
    Var,
    Wildcard,
    expr_attributes,
)
from .errors import ConstraintError, ConstraintSyntaxError
from .relational import RelationSchema, Schema, Value, coerce_value

KEYWORDS = {"function", "on", "sum", "where", "and", "or", "not", "rule"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<string>'[^'\n]*'|"[^"\n]*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|<=|>=|!=|=|<|>|\(|\)|,|:|\+|-|\*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # name, number, string, op, wild, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ConstraintSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "comment"):
            if kind == "name" and lexeme == "_":
                kind = "wild"
            tokens.append(Token(kind, lexeme, line, pos - line_start + 1))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def parse_number(text: str) -> Fraction:
    return Fraction(text)


class _Parser:
    def __init__(self, text: str, schema: Schema) -> None:
        self.tokens = tokenize(text)
        self.i = 0
        self.schema = schema

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Optional[Token] = None) -> ConstraintSyntaxError:
        tok = tok or self.tok
        return ConstraintSyntaxError(message, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "name") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def name(self, what: str) -> Token:
        if self.tok.kind != "name" or self.tok.text in KEYWORDS:
            raise self.error(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def signed_number(self) -> Fraction:
        sign = 1
        if self.at("-") or self.at("+"):
            sign = -1 if self.advance().text == "-" else 1
        if self.tok.kind != "number":
            raise self.error(f"expected a number, found {self.tok.text or 'end of input'!r}")
        return sign * parse_number(self.advance().text)

    def literal(self) -> Value:
        if self.tok.kind == "string":
            return self.advance().text[1:-1]
        value = self.signed_number()
        return int(value) if value.denominator == 1 else value

    # statements
    def parse(self) -> tuple[list[AggregationFunction], list[tuple[AggregateConstraint, Token]]]:
        functions: list[AggregationFunction] = []
        constraints: list[tuple[AggregateConstraint, Token]] = []
        while self.tok.kind != "eof":
            if self.at("function"):
                functions.append(self.function())
            else:
                start = self.tok
                constraints.append((self.constraint(len(constraints) + 1), start))
        return functions, constraints

    def function(self) -> AggregationFunction:
        self.expect("function")
        name = self.name("function name").text
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.name("parameter").text)
            while self.at(","):
                self.advance()
                params.append(self.name("parameter").text)
        self.expect(")")
        if len(set(params)) != len(params):
            raise ConstraintError(f"function {name}: duplicate parameter names")
        self.expect("on")
        rel_tok = self.name("relation name")
        if rel_tok.text not in self.schema:
            raise ConstraintError(f"function {name}: unknown relation {rel_tok.text!r}")
        rel = self.schema[rel_tok.text]
        for p in params:
            if rel.has(p):
                raise ConstraintError(f"function {name}: parameter {p!r} shadows an attribute of {rel.name}")
        self.expect(":")
        self.expect("sum")
        self.expect("(")
        body = self.attrexpr(rel)
        self.expect(")")
        condition = None
        if self.at("where"):
            self.advance()
            condition = self.condition(rel, params)
        return AggregationFunction(name, rel.name, tuple(params), body, condition)

    def attrexpr(self, rel: RelationSchema) -> Expr:
        left = self.attr_primary(rel)
        while self.at("+") or self.at("-"):
            op = self.advance().text
            right = self.attr_primary(rel)
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def attr_primary(self, rel: RelationSchema) -> Expr:
        if self.at("("):
            self.advance()
            e = self.attrexpr(rel)
            self.expect(")")
            return self._no_product(e, rel)
        if self.tok.kind == "number" or ((self.at("-") or self.at("+")) and self.peek().kind == "number"):
            value = self.signed_number()
            if self.at("*"):
                self.advance()
                if self.at("("):
                    self.advance()
                    inner = self.attrexpr(rel)
                    self.expect(")")
                else:
                    inner = self.attr_leaf(rel)
                return self._no_product(Scale(value, inner), rel)
            return self._no_product(Const(value), rel)
        return self._no_product(self.attr_leaf(rel), rel)

    def attr_leaf(self, rel: RelationSchema) -> Expr:
        tok = self.name("attribute or number")
        if not rel.has(tok.text):
            raise ConstraintError(f"relation {rel.name} has no attribute {tok.text!r}")
        if not rel.attribute(tok.text).numeric:
            raise ConstraintError(f"attribute {rel.name}.{tok.text} is not numerical and cannot be summed")
        return AttrRef(tok.text)

    def _no_product(self, e: Expr, rel: RelationSchema) -> Expr:
        if not self.at("*"):
            return e
        star = self.tok
        nxt = self.peek()
        if nxt.kind == "number" and not expr_attributes(e):
            raise self.error("write constant factors as 'number * (expression)'", star)
        if expr_attributes(e) and (nxt.kind == "name" or nxt.text == "("):
            raise self.error(
                "non-linear attribute expression: products of attributes are not allowed, "
                "only 'constant * (expression)'",
                star,
            )
        raise self.error("the constant factor must precede the expression: 'number * (expression)'", star)

    def condition(self, rel: RelationSchema, params: list[str]) -> Condition:
        items = [self.cond_and(rel, params)]
        while self.at("or"):
            self.advance()
            items.append(self.cond_and(rel, params))
        return items[0] if len(items) == 1 else Or(tuple(items))

    def cond_and(self, rel: RelationSchema, params: list[str]) -> Condition:
        items = [self.cond_not(rel, params)]
        while self.at("and"):
            self.advance()
            items.append(self.cond_not(rel, params))
        return items[0] if len(items) == 1 else And(tuple(items))

    def cond_not(self, rel: RelationSchema, params: list[str]) -> Condition:
        if self.at("not"):
            self.advance()
            return Not(self.cond_not(rel, params))
        if self.at("("):
            self.advance()
            c = self.condition(rel, params)
            self.expect(")")
            return c
        left = self.operand(rel, params)
        if not (self.tok.kind == "op" and self.tok.text in ("=", "!=", "<", "<=", ">", ">=")):
            raise self.error(f"expected a comparison operator, found {self.tok.text or 'end of input'!r}")
        op = self.advance().text
        right = self.operand(rel, params)
        return Cmp(op, left, right)

    def operand(self, rel: RelationSchema, params: list[str]) -> Operand:
        if self.tok.kind == "name" and self.tok.text not in KEYWORDS:
            tok = self.advance()
            if tok.text in params:
                return Param(tok.text)
            if rel.has(tok.text):
                return AttrRef(tok.text)
            raise ConstraintError(f"{tok.text!r} is neither a parameter nor an attribute of {rel.name}")
        if self.tok.kind in ("string", "number") or self.at("-") or self.at("+"):
            return Const(self.literal())
        raise self.error(f"expected an operand, found {self.tok.text or 'end of input'!r}")

    def constraint(self, index: int) -> AggregateConstraint:
        name, named = f"c{index}", False
        if self.at("rule"):
            self.advance()
            name, named = self.name("rule name").text, True
            self.expect(":")
        body: list[Atom] = []
        if self.tok.kind == "name" and self.tok.text in self.schema and self.peek().text == "(":
            body.append(self.atom())
            while self.at(","):
                self.advance()
                body.append(self.atom())
            self.expect("->")
        terms = self.linear()
        if not (self.tok.kind == "op" and self.tok.text in ("<=", ">=", "=")):
            raise self.error(f"expected '<=', '>=' or '=', found {self.tok.text or 'end of input'!r}")
        cmp = self.advance().text
        bound = self.signed_number()
        return AggregateConstraint(name, tuple(body), tuple(terms), cmp, bound, named)

    def atom(self) -> Atom:
        rel_tok = self.name("relation name")
        if rel_tok.text not in self.schema:
            raise ConstraintError(f"unknown relation {rel_tok.text!r}")
        self.expect("(")
        terms = [self.term()]
        while self.at(","):
            self.advance()
            terms.append(self.term())
        self.expect(")")
        return Atom(rel_tok.text, tuple(terms))

    def term(self) -> Term:
        if self.tok.kind == "wild":
            self.advance()
            return Wildcard()
        if self.tok.kind == "name" and self.tok.text not in KEYWORDS:
            return Var(self.advance().text)
        return Const(self.literal())

    def linear(self) -> list[AggTerm]:
        sign = 1
        if self.at("-") or self.at("+"):
            sign = -1 if self.advance().text == "-" else 1
        terms = [self.sterm(sign)]
        while self.at("+") or self.at("-"):
            sign = -1 if self.advance().text == "-" else 1
            terms.append(self.sterm(sign))
        return terms

    def sterm(self, sign: int) -> AggTerm:
        coef = Fraction(sign)
        if self.tok.kind == "number":
            coef *= parse_number(self.advance().text)
            self.expect("*")
        fname = self.name("aggregation function name").text
        self.expect("(")
        args: list[Arg] = []
        if not self.at(")"):
            args.append(self.arg())
            while self.at(","):
                self.advance()
                args.append(self.arg())
        self.expect(")")
        return AggTerm(coef, fname, tuple(args))

    def arg(self) -> Arg:
        if self.tok.kind == "wild":
            raise self.error("'_' cannot be an argument of an aggregation function")
        if self.tok.kind == "name" and self.tok.text not in KEYWORDS:
            return Var(self.advance().text)
        return Const(self.literal())


def parse_constraints(text: str, schema: Schema) -> ConstraintSet:
    """Parse constraint-language text against ``schema`` and validate it."""
    parser = _Parser(text, schema)
    functions, constraints = parser.parse()
    fmap: dict[str, AggregationFunction] = {}
    for f in functions:
        if f.name in fmap:
            raise ConstraintError(f"function {f.name} defined twice")
        if f.name in schema:
            raise ConstraintError(f"function {f.name} has the same name as a relation")
        fmap[f.name] = f
    seen: set[str] = set()
    for c, tok in constraints:
        if c.name in seen:
            raise ConstraintError(f"constraint {c.name} defined twice")
        seen.add(c.name)
        _validate_constraint(c, fmap, schema)
    return ConstraintSet(fmap, tuple(c for c, _ in constraints))


def _validate_constraint(c: AggregateConstraint, fmap: dict[str, AggregationFunction], schema: Schema) -> None:
    body_vars: set[str] = set()
    for atom in c.body:
        rel = schema[atom.relation]
        if len(atom.terms) != rel.arity:
            raise ConstraintError(
                f"constraint {c.name}: atom {atom.relation} has {len(atom.terms)} terms, expected {rel.arity}"
            )
        for attr, t in zip(rel.attributes, atom.terms):
            if attr.measure and not isinstance(t, Wildcard):
                raise ConstraintError(
                    f"constraint {c.name}: measure attribute {rel.name}.{attr.name} must be bound to '_'"
                )
            if isinstance(t, Var):
                body_vars.add(t.name)
    for term in c.terms:
        if term.function not in fmap:
            raise ConstraintError(f"constraint {c.name}: unknown aggregation function {term.function!r}")
        f = fmap[term.function]
        if len(term.args) != f.arity:
            raise ConstraintError(
                f"constraint {c.name}: {f.name} takes {f.arity} arguments, got {len(term.args)}"
            )
        for a in term.args:
            if isinstance(a, Var) and a.name not in body_vars:
                raise ConstraintError(f"constraint {c.name}: variable {a.name} does not occur in the body")


def parse_ground_atom(text: str, schema: Schema) -> tuple[str, tuple[Value, ...]]:
    """Parse ``Rel(v1, ..., vn)`` with constraint-language literals.

    Values are coerced to the attribute domains; the arity must match.
    """
    p = _Parser(text, schema)
    rel_tok = p.name("relation name")
    if rel_tok.text not in schema:
        raise ConstraintError(f"unknown relation {rel_tok.text!r}")
    rel = schema[rel_tok.text]
    p.expect("(")
    values = [p.literal()]
    while p.at(","):
        p.advance()
        values.append(p.literal())
    p.expect(")")
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after the atom")
    if len(values) != rel.arity:
        raise ConstraintError(f"{rel.name} has {rel.arity} attributes, the atom gives {len(values)}")
    out = []
    for attr, v in zip(rel.attributes, values):
        try:
            out.append(coerce_value(attr.domain, v))
        except ValueError as exc:
            raise ConstraintError(f"{rel.name}.{attr.name}: {exc}") from None
    return rel.name, tuple(out)
