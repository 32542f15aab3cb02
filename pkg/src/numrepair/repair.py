"""Repair existence, minimal-support enumeration and repair checking.

Everything is decided at the level of supports: a support is *feasible*
when some assignment to its cells (cells may keep their value) makes the
instance consistent.  Feasibility is monotone, so

* a repair is set-minimal iff its support is feasible and each subset
  obtained by dropping one cell is infeasible;
* a repair is card-minimal iff no support smaller than its own is feasible.

Searches enumerate supports by size, then lexicographically by cell, inside
a declared bound.  Solver or branch limits never turn into a silent "no":
such supports are reported as indeterminate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional, Sequence

from .constraints import ConstraintSet, desugar_equalities, expr_attributes
from .evaluator import (
    GroundConstraint,
    check,
    eval_condition,
    ground_all,
    lhs_value,
    holds,
    bind_params,
)
from .linear import SupportEncoding, search_support, sorted_cells
from .relational import (
    CellRef,
    Instance,
    UpdateSet,
    Update,
    apply_update_set,
    validate_update_set,
)
from .solver import SolverConfig
from .constraints import format_number

SEMANTICS = ("set", "card")
DEFAULT_MAX_SUPPORT = 4


@dataclass(frozen=True)
class SearchLimits:
    max_support: int = DEFAULT_MAX_SUPPORT
    max_branches: Optional[int] = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def to_dict(self) -> dict:
        return {
            "max_support": self.max_support,
            "max_branches": self.max_branches,
            "box": self.solver.box,
            "max_nodes": self.solver.max_nodes,
        }


@dataclass(frozen=True)
class FeasibilityResult:
    """``status`` is ``feasible``, ``infeasible`` or ``indeterminate``."""

    status: str
    support: frozenset
    values: Optional[dict] = None
    reason: str = ""

    @property
    def feasible(self) -> Optional[bool]:
        return {"feasible": True, "infeasible": False}.get(self.status)

    def update_set(self, instance: Instance) -> UpdateSet:
        """The witness as an update set, dropping cells that kept their value."""
        if self.values is None:
            return UpdateSet()
        changed = [Update(c, v) for c, v in self.values.items() if v != instance.value(c)]
        return UpdateSet(tuple(sorted(changed, key=lambda u: (u.cell.relation, u.cell.row, u.cell.attribute))))


def _cell_dict(cell: CellRef) -> dict:
    return {"relation": cell.relation, "row": cell.row, "attr": cell.attribute}


def _num(v) -> str:
    return format_number(Fraction(v))


class RepairContext:
    """Shared state for many feasibility questions about one instance."""

    def __init__(self, instance: Instance, cs: ConstraintSet, limits: Optional[SearchLimits] = None) -> None:
        self.instance = instance
        self.cs = cs
        self.limits = limits or SearchLimits()
        self.desugared = desugar_equalities(cs)
        self.grounds = ground_all(instance, self.desugared)
        self.violated = [g for g in self.grounds if not holds(lhs_value(instance, self.desugared, g), g.cmp, g.bound)]
        self.influence = {g: self._influence(g) for g in self.violated}
        relevant: set[CellRef] = set()
        for g in self.grounds:
            relevant |= self._influence(g)
        self.candidates = sorted_cells(relevant)
        self._cache: dict[frozenset, FeasibilityResult] = {}
        self._tables: dict = {}
        # feasibility is monotone: subsets of these supports are infeasible too
        self._infeasible: list[frozenset] = []

    @property
    def consistent(self) -> bool:
        return not self.violated

    def _influence(self, g: GroundConstraint) -> frozenset:
        """Cells whose value can change the left-hand side of ``g``."""
        out: set[CellRef] = set()
        schema = self.instance.schema
        for term in g.terms:
            f = self.desugared.function(term.function)
            rel = schema[f.relation]
            measures = set(rel.measures)
            body = expr_attributes(f.body) & measures
            cond = f.condition_attributes() & measures
            params = bind_params(f, schema, term.args)
            for tid in self.instance.tuple_ids(rel.name):
                row = self.instance.row(tid)
                if cond:
                    attrs = body | cond
                elif eval_condition(f.condition, lambda a, row=row: row[rel.index(a)], params):
                    attrs = body
                else:
                    continue
                out.update(CellRef(tid.relation, tid.row, a) for a in attrs)
        return frozenset(out)

    def may_fix(self, support: frozenset) -> bool:
        """Necessary condition: the support touches every violated ground constraint."""
        return all(self.influence[g] & support for g in self.violated)

    def feasible(self, support: Iterable[CellRef], extra=None) -> FeasibilityResult:
        support = frozenset(CellRef(*c) for c in support)
        if extra is None and support in self._cache:
            return self._cache[support]
        if extra is None and self.violated and not self.may_fix(support):
            result = FeasibilityResult("infeasible", support, reason="support misses a violated constraint")
        elif extra is None and any(support <= big for big in self._infeasible):
            result = FeasibilityResult("infeasible", support, reason="a superset of the support is infeasible")
        else:
            enc = SupportEncoding(self.instance, self.cs, support, self.grounds, self._tables)
            if extra is not None:
                extra(enc)
            found = search_support(enc, self.limits.max_branches, self.limits.solver)
            result = FeasibilityResult(found.status, support, found.assignment, found.reason)
        if extra is None:
            self._cache[support] = result
            if result.feasible is False:
                self._infeasible.append(support)
        return result


def feasible(
    instance: Instance,
    cs: ConstraintSet,
    support: Iterable[CellRef],
    limits: Optional[SearchLimits] = None,
) -> FeasibilityResult:
    """Is there a repair changing only cells of ``support`` (or is the instance consistent)?"""
    return RepairContext(instance, cs, limits).feasible(support)


def repair_exists(
    instance: Instance,
    cs: ConstraintSet,
    limits: Optional[SearchLimits] = None,
    small_sample: bool = True,
) -> tuple[Optional[bool], UpdateSet, str]:
    """``(answer, sample repair, reason)``; the answer is ``None`` when indeterminate.

    A consistent instance has the empty repair.  With ``small_sample`` the
    sample comes from a card-minimal support when one exists within
    ``limits.max_support``; otherwise it is the witness over all cells.
    """
    ctx = RepairContext(instance, cs, limits)
    if ctx.consistent:
        return True, UpdateSet(), "instance is consistent"
    result = ctx.feasible(ctx.candidates)
    if result.feasible and small_sample:
        entry = next(iter(SupportSearch(ctx, "card")), None)
        if entry is not None:
            return True, entry.sample, ""
    return result.feasible, result.update_set(instance), result.reason


@dataclass(frozen=True)
class SupportEntry:
    cells: tuple[CellRef, ...]
    sample: UpdateSet

    def to_dict(self, instance: Instance) -> dict:
        return {
            "cells": [_cell_dict(c) for c in self.cells],
            "sample": [
                {"cell": _cell_dict(u.cell), "old": _num(instance.value(u.cell)), "new": _num(u.value)}
                for u in self.sample
            ],
        }


@dataclass(frozen=True)
class RepairReport:
    semantics: str
    supports: tuple[SupportEntry, ...]
    kstar: Optional[int]
    limits: SearchLimits
    complete: bool = True
    indeterminate: tuple[tuple[CellRef, ...], ...] = ()
    consistent: bool = False

    def support_sets(self) -> set[frozenset]:
        return {frozenset(s.cells) for s in self.supports}

    def to_dict(self, instance: Instance) -> dict:
        out: dict = {"semantics": self.semantics}
        if self.semantics == "card":
            out["kstar"] = self.kstar
        out["consistent"] = self.consistent
        out["supports"] = [s.to_dict(instance) for s in self.supports]
        out["limits"] = {**self.limits.to_dict(), "complete": self.complete}
        if self.indeterminate:
            out["indeterminate"] = [[_cell_dict(c) for c in cells] for cells in self.indeterminate]
        return out

    def to_json(self, instance: Instance) -> str:
        return json.dumps(self.to_dict(instance), indent=2)


def _check_semantics(semantics: str) -> None:
    if semantics not in SEMANTICS:
        raise ValueError(f"semantics must be one of {SEMANTICS}, got {semantics!r}")


class SupportSearch:
    """Lazy enumeration of minimal feasible supports, by size then by cells.

    Iterating yields ``SupportEntry`` objects as they are established;
    afterwards ``kstar``, ``unknown`` and ``complete`` describe the search.
    ``card`` stops after the first size with a feasible support; ``set``
    keeps going and skips supersets of supports already found.
    """

    def __init__(self, ctx: RepairContext, semantics: str) -> None:
        _check_semantics(semantics)
        self.ctx = ctx
        self.semantics = semantics
        self.kstar: Optional[int] = None
        self.unknown: list[frozenset] = []
        self.found: list[frozenset] = []
        self.finished = False
        self.no_repair = False

    def __iter__(self):
        ctx = self.ctx
        cells = ctx.candidates
        if ctx.feasible(cells).feasible is False:
            # not even changing every relevant cell helps
            self.no_repair = True
            self.finished = True
            return
        for k in range(1, min(ctx.limits.max_support, len(cells)) + 1):
            for combo in combinations(cells, k):
                s = frozenset(combo)
                if any(f <= s for f in self.found):
                    continue
                if not ctx.may_fix(s):
                    continue
                result = ctx.feasible(s)
                if result.feasible is None:
                    self.unknown.append(s)
                    continue
                if not result.feasible:
                    continue
                if any(u < s for u in self.unknown):
                    # a subset might be feasible too: minimality is not established
                    self.unknown.append(s)
                    continue
                self.found.append(s)
                if self.semantics == "card":
                    self.kstar = k
                yield SupportEntry(tuple(combo), result.update_set(ctx.instance))
            if self.semantics == "card" and self.found:
                break
        self.finished = True

    @property
    def complete(self) -> bool:
        """Whether the enumeration provably listed every minimal support."""
        if self.no_repair:
            return True
        if not self.finished or self.unknown:
            return False
        if self.semantics == "card" and self.kstar is not None:
            return True
        return len(self.ctx.candidates) <= self.ctx.limits.max_support


def minimal_supports(
    instance: Instance,
    cs: ConstraintSet,
    semantics: str = "set",
    max_support: Optional[int] = None,
    limits: Optional[SearchLimits] = None,
    context: Optional[RepairContext] = None,
) -> RepairReport:
    """Minimal feasible supports of size at most ``max_support``."""
    _check_semantics(semantics)
    limits = limits or SearchLimits()
    if max_support is not None:
        limits = SearchLimits(max_support, limits.max_branches, limits.solver)
    ctx = context or RepairContext(instance, cs, limits)
    if ctx.consistent:
        return RepairReport(semantics, (SupportEntry((), UpdateSet()),), 0, limits, True, (), True)
    search = SupportSearch(ctx, semantics)
    found = tuple(search)
    indeterminate = tuple(tuple(sorted_cells(u)) for u in search.unknown)
    return RepairReport(semantics, found, search.kstar, limits, search.complete, indeterminate)


@dataclass(frozen=True)
class RepairVerdict:
    is_repair: bool
    is_minimal: Optional[bool]
    semantics: str
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "semantics": self.semantics,
            "is_repair": self.is_repair,
            "is_minimal": self.is_minimal,
            "reason": self.reason,
        }


def check_repair(
    instance: Instance,
    cs: ConstraintSet,
    updates: Iterable[object],
    semantics: str = "set",
    limits: Optional[SearchLimits] = None,
    context: Optional[RepairContext] = None,
) -> RepairVerdict:
    """Is ``updates`` a repair, and is it minimal under ``semantics``?

    ``is_minimal`` is ``None`` when a solver or branch limit left a
    relevant support undecided.
    """
    _check_semantics(semantics)
    u = updates if isinstance(updates, UpdateSet) else validate_update_set(instance, updates)
    if not check(apply_update_set(instance, u), cs).consistent:
        return RepairVerdict(False, False, semantics, "the updated instance violates the constraints")
    ctx = context or RepairContext(instance, cs, limits)
    if ctx.consistent:
        minimal = len(u) == 0
        return RepairVerdict(len(u) == 0, minimal, semantics, "instance is already consistent")
    support = u.support
    unknown = False
    if semantics == "set":
        for cell in sorted_cells(support):
            r = ctx.feasible(support - {cell})
            if r.feasible:
                return RepairVerdict(True, False, semantics, f"still repairable without {cell}")
            unknown = unknown or r.feasible is None
    else:
        for k in range(0, len(support)):
            for combo in combinations(ctx.candidates, k):
                s = frozenset(combo)
                if not ctx.may_fix(s):
                    continue
                r = ctx.feasible(s)
                if r.feasible:
                    cells = ", ".join(str(c) for c in combo)
                    return RepairVerdict(True, False, semantics, f"a repair with {k} updates exists ({cells})")
                unknown = unknown or r.feasible is None
    if unknown:
        return RepairVerdict(True, None, semantics, "some smaller supports could not be decided")
    return RepairVerdict(True, True, semantics, "")
