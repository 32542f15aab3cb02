"""Consistent answers to ground-atom queries.

Repairs only update measure values, so a ground atom ``q`` holds after a
repair iff some tuple agreeing with ``q`` on the non-measure attributes ends
up with exactly ``q``'s measure values.  ``q`` is *not* a consistent answer
iff some minimal repair breaks every such tuple.

Every solution over a minimal support changes all of its cells (otherwise a
smaller support would be feasible), so solutions over minimal supports are
exactly the minimal repairs.  For each minimal support we therefore ask the
linear encoding for a solution in which every matched tuple differs from
``q`` in at least one measure attribute, as ``x < v`` or ``x > v``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .constraints import ConstraintSet, format_literal, format_number
from .errors import ConstraintError
from .linear import Alternative, SupportEncoding
from .linsys import Row
from .relational import CellRef, Instance, TupleId, UpdateSet, Value, coerce_value
from .repair import RepairContext, SearchLimits, SupportSearch, _cell_dict, _check_semantics


@dataclass(frozen=True)
class GroundAtomQuery:
    relation: str
    values: tuple[Value, ...]

    def __str__(self) -> str:
        return f"{self.relation}({', '.join(format_literal(v) for v in self.values)})"


def make_query(instance: Instance, relation: str, values: Sequence[object]) -> GroundAtomQuery:
    if relation not in instance.schema:
        raise ConstraintError(f"unknown relation {relation!r}")
    rel = instance.schema[relation]
    if len(values) != rel.arity:
        raise ConstraintError(f"{relation} has {rel.arity} attributes, the query gives {len(values)}")
    out = []
    for attr, v in zip(rel.attributes, values):
        try:
            out.append(coerce_value(attr.domain, v))
        except ValueError as exc:
            raise ConstraintError(f"{relation}.{attr.name}: {exc}") from None
    return GroundAtomQuery(relation, tuple(out))


def match_tuples(instance: Instance, query: GroundAtomQuery) -> list[TupleId]:
    """Tuples equal to the query on every non-measure attribute."""
    rel = instance.schema[query.relation]
    keys = [i for i, a in enumerate(rel.attributes) if not a.measure]
    return [
        TupleId(rel.name, r)
        for r, row in enumerate(instance.rows(rel.name))
        if all(row[i] == query.values[i] for i in keys)
    ]


def holds_in(instance: Instance, query: GroundAtomQuery) -> bool:
    return any(tuple(instance.row(t)) == query.values for t in match_tuples(instance, query))


@dataclass(frozen=True)
class CQAVerdict:
    semantics: str
    answer: str  # "true", "false" or "indeterminate"
    query: GroundAtomQuery
    witness: Optional[UpdateSet] = None
    reason: str = ""
    no_repair: bool = False
    limits: Optional[SearchLimits] = None

    @property
    def value(self) -> Optional[bool]:
        return {"true": True, "false": False}.get(self.answer)

    def to_dict(self, instance: Instance) -> dict:
        out: dict = {"semantics": self.semantics, "query": str(self.query), "answer": self.answer}
        if self.witness is not None:
            out["witness"] = [
                {
                    "cell": _cell_dict(u.cell),
                    "old": format_number(Fraction(instance.value(u.cell))),
                    "new": format_number(Fraction(u.value)),
                }
                for u in self.witness
            ]
        out["reason"] = self.reason
        out["no_repair"] = self.no_repair
        if self.limits is not None:
            out["limits"] = self.limits.to_dict()
        return out

    def to_json(self, instance: Instance) -> str:
        return json.dumps(self.to_dict(instance), indent=2)


def _falsifier(instance: Instance, query: GroundAtomQuery, tuples: list[TupleId]):
    """Callback adding one choice point per matched tuple: which attribute differs from ``q``."""
    rel = instance.schema[query.relation]

    def add(enc: SupportEncoding) -> None:
        for tid in tuples:
            row = instance.row(tid)
            alts = []
            already_differs = False
            for i, attr in enumerate(rel.attributes):
                if not attr.measure:
                    continue
                cell = CellRef(tid.relation, tid.row, attr.name)
                target = Fraction(query.values[i])
                if cell not in enc.support:
                    if row[i] != query.values[i]:
                        already_differs = True
                    continue
                for op in ("<", ">"):
                    r = Row.make({cell: 1}, op, target, f"{tid}.{attr.name} {op} {format_number(target)}")
                    if attr.domain == "integer":
                        r = r.tightened()
                    alts.append(Alternative(None, (r,), f"{cell} {op} {format_number(target)}"))
            if already_differs:
                continue
            # with no alternatives the tuple keeps q's values: the search fails
            enc.add_choice_point(("query", tid), alts)

    return add


def cqa(
    instance: Instance,
    cs: ConstraintSet,
    query: GroundAtomQuery,
    semantics: str = "card",
    max_support: Optional[int] = None,
    limits: Optional[SearchLimits] = None,
) -> CQAVerdict:
    """Is ``query`` true in every minimal repair under ``semantics``?"""
    _check_semantics(semantics)
    limits = limits or SearchLimits()
    if max_support is not None:
        limits = SearchLimits(max_support, limits.max_branches, limits.solver)
    tuples = match_tuples(instance, query)
    ctx = RepairContext(instance, cs, limits)
    if ctx.consistent:
        answer = holds_in(instance, query)
        return CQAVerdict(semantics, "true" if answer else "false", query, None,
                          "instance is consistent: the only minimal repair is empty", False, limits)
    if not tuples:
        return CQAVerdict(semantics, "false", query, None,
                          "no tuple matches the query on its non-measure attributes", False, limits)
    search = SupportSearch(ctx, semantics)
    unknown = False
    any_support = False
    add = _falsifier(instance, query, tuples)
    for entry in search:
        any_support = True
        result = ctx.feasible(entry.cells, extra=add)
        if result.feasible:
            witness = result.update_set(instance)
            cells = ", ".join(str(c) for c in entry.cells)
            return CQAVerdict(semantics, "false", query, witness,
                              f"a minimal repair over {{{cells}}} falsifies the query", False, limits)
        if result.feasible is None:
            unknown = True
    if not any_support:
        if search.complete:
            return CQAVerdict(semantics, "false", query, None, "no repair exists", True, limits)
        return CQAVerdict(semantics, "indeterminate", query, None,
                          f"no minimal repair found within support size {limits.max_support}", False, limits)
    if unknown:
        return CQAVerdict(semantics, "indeterminate", query, None,
                          "a minimal support could not be decided", False, limits)
    if not search.complete:
        return CQAVerdict(semantics, "indeterminate", query, None,
                          f"no falsifying repair with at most {limits.max_support} updates; larger minimal "
                          "repairs were not searched", False, limits)
    return CQAVerdict(semantics, "true", query, None, "every minimal repair keeps the query", False, limits)
