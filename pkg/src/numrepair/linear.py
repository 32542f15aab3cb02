"""Linear systems encoding "some repair changes only cells of a support".

One variable stands for each support cell.  For every ground constraint the
cells outside the support contribute constants, which are moved to the
right-hand side, and the support cells contribute their (symbolic) share of
the attribute expression.

Whether a tuple is selected by an aggregation condition can itself depend on
support cells (``sum(1) where Val != 0 and Val != 1``).  Each such
(function, arguments, tuple) triple becomes a *choice point*: the tuple is
either counted, via one disjunct of the condition's DNF, or not counted, via
one disjunct of the DNF of its negation.  Disequalities split into ``<`` and
``>``.  A choice of one alternative per choice point yields one linear
system; the support is feasible iff some of these systems is.

``encode_support`` materialises every branch (capped).  ``search_support``
explores the same tree depth first and prunes partial choices whose LP
relaxation is already infeasible, which is what the repair engine uses.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Hashable, Iterable, Iterator, Mapping, Optional, Sequence

from .constraints import (
    Cmp,
    Const,
    ConstraintSet,
    Not,
    Param,
    desugar_equalities,
    linearize,
    normalize_condition_dnf,
)
from .errors import BranchLimitError
from .evaluator import GroundConstraint, bind_params, compare, eval_condition, ground_all
from .linsys import LinearSystem, Row
from .relational import CellRef, Instance, TupleId, Value
from .solver import BoundExhausted, Feasible, SolverConfig, relaxation, solve

DEFAULT_BRANCH_CAP = 4096
BRANCH_CAP_ENV = "NUMREPAIR_MAX_BRANCHES"

ZERO = Fraction(0)

Support = frozenset  # frozenset[CellRef]


def default_branch_cap() -> int:
    """Branch cap, overridable through the ``NUMREPAIR_MAX_BRANCHES`` variable."""
    raw = os.environ.get(BRANCH_CAP_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value < 1:
            raise ValueError(f"{BRANCH_CAP_ENV} must be a positive integer, got {raw!r}")
        return value
    return DEFAULT_BRANCH_CAP


def make_support(instance: Instance, cells: Iterable[CellRef]) -> frozenset[CellRef]:
    out = frozenset(CellRef(*c) for c in cells)
    for c in out:
        if not instance.is_measure_cell(c):
            raise ValueError(f"{c} is not a measure cell of the instance")
    return out


def sorted_cells(cells: Iterable[CellRef]) -> list[CellRef]:
    return sorted(cells, key=lambda c: (c.relation, c.row, c.attribute))


# -- building blocks ------------------------------------------------------------


@dataclass(frozen=True)
class Alternative:
    """One way a choice point can be resolved: extra rows plus the membership it implies.

    ``counted`` is ``None`` for choice points that do not affect any
    aggregate (the query falsification points added by CQA).
    """

    counted: Optional[bool]
    rows: tuple[Row, ...]
    label: str = ""


@dataclass(frozen=True)
class ChoicePoint:
    key: Hashable
    alternatives: tuple[Alternative, ...]


@dataclass(frozen=True)
class _Linear:
    """``sum(coeffs * x) + const`` over support cells."""

    coeffs: Mapping[CellRef, Fraction]
    const: Fraction

    def scaled(self, c: Fraction) -> "_Linear":
        return _Linear({k: v * c for k, v in self.coeffs.items()}, self.const * c)


@dataclass
class _GroundRow:
    ground: GroundConstraint
    fixed_coeffs: dict[CellRef, Fraction]
    fixed_const: Fraction
    # (choice point index, contribution when counted)
    pending: list[tuple[int, _Linear]]

    def row(self, membership: Mapping[int, bool]) -> Row:
        coeffs = dict(self.fixed_coeffs)
        const = self.fixed_const
        for idx, contrib in self.pending:
            if membership[idx]:
                for k, v in contrib.coeffs.items():
                    coeffs[k] = coeffs.get(k, ZERO) + v
                const += contrib.const
        return Row.make(coeffs, "<=", self.ground.bound - const, self.ground.label())

    def relaxed(self, membership: Mapping[int, bool]) -> Optional[Row]:
        """A necessary condition when some choices are still open.

        Open contributions that are pure constants are replaced by their
        smallest possible value ``min(0, c)``; if an open contribution has
        variables the row is skipped.
        """
        coeffs = dict(self.fixed_coeffs)
        const = self.fixed_const
        for idx, contrib in self.pending:
            decided = membership.get(idx)
            if decided is None:
                if contrib.coeffs:
                    return None
                const += min(ZERO, contrib.const)
            elif decided:
                for k, v in contrib.coeffs.items():
                    coeffs[k] = coeffs.get(k, ZERO) + v
                const += contrib.const
        return Row.make(coeffs, "<=", self.ground.bound - const, self.ground.label())


@dataclass(frozen=True)
class _Table:
    """One aggregate ``f(args)`` evaluated on the unchanged instance."""

    params: Mapping[str, Value]
    counted: tuple[bool, ...]
    value: tuple[Fraction, ...]
    base: Fraction
    reads: frozenset
    cond_reads: frozenset
    pos: list
    neg: list

    @classmethod
    def build(cls, instance: Instance, f, args: tuple) -> "_Table":
        rel = instance.schema[f.relation]
        params = bind_params(f, instance.schema, args)
        coeffs, const = linearize(f.body)
        counted = []
        values = []
        for row in instance.rows(rel.name):
            counted.append(eval_condition(f.condition, lambda a, row=row: row[rel.index(a)], params))
            values.append(const + sum((c * row[rel.index(a)] for a, c in coeffs.items()), ZERO))
        base = sum((v for v, c in zip(values, counted) if c), ZERO)
        cond_reads = frozenset(f.condition_attributes())
        return cls(
            params,
            tuple(counted),
            tuple(values),
            base,
            frozenset(coeffs) | cond_reads,
            cond_reads,
            normalize_condition_dnf(f.condition),
            normalize_condition_dnf(Not(f.condition)) if f.condition is not None else [],
        )


def _is_integer_row(row: Row, system: LinearSystem) -> bool:
    return bool(row.coeffs) and all(system.variables[k].domain == "integer" for k in row.coeffs)


class SupportEncoding:
    """Variables, ground rows and choice points for one (instance, constraints, support)."""

    def __init__(
        self,
        instance: Instance,
        cs: ConstraintSet,
        support: Iterable[CellRef],
        grounds: Optional[Sequence[GroundConstraint]] = None,
        tables: Optional[dict] = None,
    ) -> None:
        """``grounds`` may pass precomputed groundings of ``desugar_equalities(cs)``;
        ``tables`` is a cache of per-aggregate data that only depends on the instance
        and may be shared between encodings of different supports."""
        self.instance = instance
        self.cs = desugar_equalities(cs)
        self.support = make_support(instance, support)
        self.variables = LinearSystem()
        for cell in sorted_cells(self.support):
            self.variables.add_variable(cell, instance.domain(cell), instance.value(cell))
        self.choice_points: list[ChoicePoint] = []
        self._cp_index: dict[Hashable, int] = {}
        self._contrib_cache: dict[tuple, tuple] = {}
        self.tables = {} if tables is None else tables
        self._support_rows: dict[str, dict[int, set[str]]] = {}
        for cell in self.support:
            self._support_rows.setdefault(cell.relation, {}).setdefault(cell.row, set()).add(cell.attribute)
        self.ground_rows: list[_GroundRow] = []
        for g in ground_all(instance, self.cs) if grounds is None else grounds:
            self.ground_rows.append(self._ground_row(g))

    # -- values and comparisons ------------------------------------------------

    def _cell_linear(self, tid: TupleId, attr: str) -> _Linear:
        cell = CellRef(tid.relation, tid.row, attr)
        if cell in self.support:
            return _Linear({cell: Fraction(1)}, ZERO)
        return _Linear({}, Fraction(self.instance.value(cell)))

    def _expression(self, function, tid: TupleId) -> _Linear:
        coeffs, const = linearize(function.body)
        out: dict[CellRef, Fraction] = {}
        total = const
        for attr, c in coeffs.items():
            lin = self._cell_linear(tid, attr)
            total += c * lin.const
            for k, v in lin.coeffs.items():
                out[k] = out.get(k, ZERO) + c * v
        return _Linear({k: v for k, v in out.items() if v}, total)

    def _operand(self, o, tid: TupleId, params: Mapping[str, Value]):
        """A constant value, or the support cell the operand reads."""
        if isinstance(o, Const):
            return o.value, None
        if isinstance(o, Param):
            return params[o.name], None
        cell = CellRef(tid.relation, tid.row, o.name)
        if cell in self.support:
            return None, cell
        return self.instance.value(cell), None

    def _comparison_options(self, cmp: Cmp, tid: TupleId, params) -> Optional[list[Optional[Row]]]:
        """Rows that can realise ``cmp``: ``[None]`` if constantly true, ``[]`` if false."""
        lv, lc = self._operand(cmp.left, tid, params)
        rv, rc = self._operand(cmp.right, tid, params)
        if lc is None and rc is None:
            return [None] if compare(cmp.op, lv, rv) else []
        other = lv if lc is None else rv
        if isinstance(other, str):
            # a measure cell never equals a string; ordering is an error
            return [None] if compare(cmp.op, 0, other) else []
        coeffs: dict[CellRef, Fraction] = {}
        bound = ZERO
        if lc is not None:
            coeffs[lc] = coeffs.get(lc, ZERO) + 1
        else:
            bound -= Fraction(lv)
        if rc is not None:
            coeffs[rc] = coeffs.get(rc, ZERO) - 1
        else:
            bound += Fraction(rv)
        ops = ["<", ">"] if cmp.op == "!=" else [cmp.op]
        out: list[Optional[Row]] = []
        label = f"{tid}"
        for op in ops:
            row = Row.make(coeffs, op, bound, label)
            if not row.coeffs:
                if row.constant_truth():
                    out.append(None)
                continue
            if _is_integer_row(row, self.variables):
                row = row.tightened()
            out.append(row)
        return out

    def _alternatives(self, dnf, counted: bool, tid: TupleId, params) -> list[Alternative]:
        out = []
        for disjunct in dnf:
            options = [self._comparison_options(c, tid, params) for c in disjunct]
            for combo in product(*options):
                rows = tuple(r for r in combo if r is not None)
                out.append(Alternative(counted, rows, "counted" if counted else "not counted"))
        return out

    # -- ground rows -----------------------------------------------------------

    def _table(self, function_name: str, args: tuple) -> "_Table":
        key = (function_name, args)
        table = self.tables.get(key)
        if table is None:
            table = _Table.build(self.instance, self.cs.function(function_name), args)
            self.tables[key] = table
        return table

    def _contributions(self, function_name: str, args: tuple) -> tuple[Fraction, list]:
        """Constant part of the aggregate plus the entries that depend on the support.

        Entries are ``(choice index | None, counted, contribution)`` for the
        tuples that have a support cell among the attributes the function reads.
        """
        key = (function_name, args)
        if key in self._contrib_cache:
            return self._contrib_cache[key]
        table = self._table(function_name, args)
        f = self.cs.function(function_name)
        base = table.base
        out = []
        for row in sorted(self._support_rows.get(f.relation, {})):
            attrs = self._support_rows[f.relation][row]
            if not attrs & table.reads:
                continue
            tid = TupleId(f.relation, row)
            if table.counted[row]:
                base -= table.value[row]
            contrib = self._expression(f, tid)
            if not attrs & table.cond_reads:
                if table.counted[row]:
                    out.append((None, True, contrib))
                continue
            cp_key = (function_name, args, tid)
            idx = self._cp_index.get(cp_key)
            if idx is None:
                params = table.params
                alts = _prune_alternatives(
                    self._alternatives(table.pos, True, tid, params)
                    + self._alternatives(table.neg, False, tid, params)
                )
                if len({a.counted for a in alts}) == 1:
                    # membership does not depend on the support after all
                    if alts[0].counted:
                        out.append((None, True, contrib))
                    continue
                idx = len(self.choice_points)
                self.choice_points.append(ChoicePoint(cp_key, tuple(alts)))
                self._cp_index[cp_key] = idx
            out.append((idx, None, contrib))
        self._contrib_cache[key] = (base, out)
        return base, out

    def _ground_row(self, g: GroundConstraint) -> _GroundRow:
        coeffs: dict[CellRef, Fraction] = {}
        const = ZERO
        pending: list[tuple[int, _Linear]] = []
        for term in g.terms:
            base, entries = self._contributions(term.function, term.args)
            const += term.coef * base
            for idx, counted, contrib in entries:
                scaled = contrib.scaled(term.coef)
                if idx is not None:
                    pending.append((idx, scaled))
                elif counted:
                    for k, v in scaled.coeffs.items():
                        coeffs[k] = coeffs.get(k, ZERO) + v
                    const += scaled.const
        return _GroundRow(g, {k: v for k, v in coeffs.items() if v}, const, pending)

    # -- assembling systems ----------------------------------------------------

    def add_choice_point(self, key: Hashable, alternatives: Sequence[Alternative]) -> None:
        """Register an extra choice point that does not affect any aggregate."""
        self._cp_index[key] = len(self.choice_points)
        self.choice_points.append(ChoicePoint(key, tuple(alternatives)))

    def branch_count(self) -> int:
        total = 1
        for cp in self.choice_points:
            total *= len(cp.alternatives)
        return total

    def system(self, choices: Sequence[int]) -> LinearSystem:
        """The linear system for one alternative index per choice point."""
        membership = {}
        frozen: list[Row] = []
        for i, (cp, a) in enumerate(zip(self.choice_points, choices)):
            alt = cp.alternatives[a]
            membership[i] = alt.counted
            frozen.extend(alt.rows)
        rows = [gr.row(membership) for gr in self.ground_rows]
        out = self.variables.copy()
        out.extend(_merge_equalities(rows) + frozen)
        return out

    def membership(self, choices: Sequence[int]) -> dict[Hashable, Optional[bool]]:
        return {cp.key: cp.alternatives[a].counted for cp, a in zip(self.choice_points, choices)}


def _row_key(row: Row) -> tuple:
    return (frozenset(row.coeffs.items()), row.op, row.bound)


def _bounds_consistent(rows: Sequence[Row]) -> bool:
    """False when the single-variable rows alone bound some variable to an empty interval."""
    lo: dict = {}
    hi: dict = {}
    for r in rows:
        if len(r.coeffs) != 1:
            continue
        ((k, c),) = r.coeffs.items()
        v = r.bound / c
        strict = r.op == "<"
        if r.op == "=" or c > 0:
            if k not in hi or v < hi[k][0] or (v == hi[k][0] and strict):
                hi[k] = (v, strict)
        if r.op == "=" or c < 0:
            if k not in lo or v > lo[k][0] or (v == lo[k][0] and strict):
                lo[k] = (v, strict)
    for k in lo.keys() & hi.keys():
        (a, sa), (b, sb) = lo[k], hi[k]
        if a > b or (a == b and (sa or sb)):
            return False
    return True


def _prune_alternatives(alts: list[Alternative]) -> list[Alternative]:
    """Drop alternatives implied by a weaker one with the same membership.

    When every remaining alternative has the same membership their
    disjunction is valid, so a single unconstrained alternative is returned.
    """
    alts = [a for a in alts if _bounds_consistent(a.rows)]
    if not alts:
        return []
    keyed = [(a, frozenset(_row_key(r) for r in a.rows)) for a in alts]
    out = []
    for i, (a, rows) in enumerate(keyed):
        dominated = any(
            b.counted == a.counted and (other < rows or (other == rows and j < i))
            for j, (b, other) in enumerate(keyed)
            if j != i
        )
        if not dominated:
            out.append(a)
    if len({a.counted for a in out}) == 1:
        return [Alternative(out[0].counted, (), out[0].label)]
    return out


def _merge_equalities(rows: list[Row]) -> list[Row]:
    """Fuse ``a.x <= b`` and ``-a.x <= -b`` into ``a.x = b``; drops true constant rows."""
    out: list[Row] = []
    used = [False] * len(rows)
    index: dict[tuple, list[int]] = {}
    for i, r in enumerate(rows):
        if not r.coeffs and r.constant_truth():
            used[i] = True
            continue
        index.setdefault((frozenset(r.coeffs.items()), r.op, r.bound), []).append(i)
    for i, r in enumerate(rows):
        if used[i]:
            continue
        used[i] = True
        if r.op == "<=":
            twins = index.get((frozenset((k, -v) for k, v in r.coeffs.items()), "<=", -r.bound), [])
            twin = next((j for j in twins if not used[j]), None)
            if twin is not None:
                used[twin] = True
                out.append(Row(r.coeffs, "=", r.bound, _pair_label(r.provenance, rows[twin].provenance)))
                continue
        out.append(r)
    return out


def _pair_label(a: str, b: str) -> str:
    for suffix in ("[<=]", "[>=]"):
        a = a.replace(suffix, "")
        b = b.replace(suffix, "")
    return a if a == b else f"{a} & {b}"


# -- public operations ----------------------------------------------------------


def adjusted_constant(
    instance: Instance,
    cs: ConstraintSet,
    ground: GroundConstraint,
    support: Iterable[CellRef],
    membership: Optional[Mapping[Hashable, bool]] = None,
) -> Fraction:
    """Bound of ``ground`` after moving every constant contribution to the right.

    ``membership`` maps ``(function, args, TupleId)`` to whether the tuple is
    counted, for tuples whose selection depends on support cells.
    """
    enc = SupportEncoding(instance, ConstraintSet(cs.functions, ()), support)
    gr = enc._ground_row(ground)
    decided = {}
    for idx, cp in enumerate(enc.choice_points):
        if membership is None or cp.key not in membership:
            raise KeyError(f"membership of {cp.key} must be given")
        decided[idx] = bool(membership[cp.key])
    const = gr.fixed_const
    for idx, contrib in gr.pending:
        if decided[idx]:
            const += contrib.const
    return ground.bound - const


@dataclass
class BranchSet:
    """Disjunction of linear systems, one per choice of alternatives."""

    systems: list[LinearSystem]
    choices: list[tuple[int, ...]] = field(default_factory=list)
    choice_points: list[ChoicePoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.systems)

    def __iter__(self) -> Iterator[LinearSystem]:
        return iter(self.systems)

    @property
    def direct(self) -> bool:
        return not self.choice_points

    def to_dict(self) -> dict:
        return {"branches": [s.to_dict() for s in self.systems]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def encode_support(
    instance: Instance,
    cs: ConstraintSet,
    support: Iterable[CellRef],
    max_branches: Optional[int] = None,
) -> BranchSet:
    """Every branch of the encoding of ``support``.

    Raises ``BranchLimitError`` when the number of branches exceeds the cap.
    """
    cap = default_branch_cap() if max_branches is None else max_branches
    enc = SupportEncoding(instance, cs, support)
    count = enc.branch_count()
    if count > cap:
        raise BranchLimitError(count, cap)
    combos = list(product(*(range(len(cp.alternatives)) for cp in enc.choice_points)))
    return BranchSet([enc.system(c) for c in combos], combos, list(enc.choice_points))


# -- pruned search -------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a support search: ``status`` is feasible, infeasible or indeterminate."""

    status: str
    assignment: Optional[dict] = None
    system: Optional[LinearSystem] = None
    reason: str = ""
    leaves: int = 0

    @property
    def feasible(self) -> Optional[bool]:
        return {"feasible": True, "infeasible": False}.get(self.status)


def search_support(
    encoding: SupportEncoding,
    max_branches: Optional[int] = None,
    solver_config: Optional[SolverConfig] = None,
) -> SearchResult:
    """Depth-first search over the choice points of ``encoding``.

    Partial choices are pruned as soon as the real relaxation of the rows
    they already determine is infeasible.  ``max_branches`` caps the number
    of complete systems handed to the exact solver; hitting it, or a solver
    ``BoundExhausted``, makes an unsuccessful search indeterminate.
    """
    cap = default_branch_cap() if max_branches is None else max_branches
    cps = encoding.choice_points
    keys = list(encoding.variables.variables)
    n = len(cps)
    # ground rows become complete once their last choice point is decided
    complete_at: dict[int, list[_GroundRow]] = {}
    partial: list[_GroundRow] = []
    for gr in encoding.ground_rows:
        last = max((idx + 1 for idx, _ in gr.pending), default=0)
        complete_at.setdefault(last, []).append(gr)
        if gr.pending:
            partial.append(gr)
    leaves = 0
    unsure = ""

    def rows_for(depth: int, membership: dict, frozen: list[Row]) -> list[Row]:
        rows = []
        for d in range(depth + 1):
            rows.extend(gr.row(membership) for gr in complete_at.get(d, []))
        for gr in partial:
            if max(idx + 1 for idx, _ in gr.pending) > depth:
                r = gr.relaxed(membership)
                if r is not None:
                    rows.append(r)
        return rows + frozen

    def dfs(depth: int, membership: dict, frozen: list[Row], choices: list[int]):
        nonlocal leaves, unsure
        rows = rows_for(depth, membership, frozen)
        if any(not r.coeffs and not r.constant_truth() for r in rows):
            return None
        if depth == n:
            if leaves >= cap:
                unsure = unsure or f"branch cap {cap} reached"
                return "stop"
            leaves += 1
            system = encoding.system(choices)
            result = solve(system, solver_config)
            if isinstance(result, Feasible):
                return result, system
            if isinstance(result, BoundExhausted):
                unsure = unsure or f"solver bound exhausted (box {result.box})"
            return None
        if depth > 0:
            point, _ = relaxation([r for r in rows if r.coeffs], keys)
            if point is None:
                return None
        for a, alt in enumerate(cps[depth].alternatives):
            membership[depth] = alt.counted
            found = dfs(depth + 1, membership, frozen + list(alt.rows), choices + [a])
            if found is not None:
                return found
        membership.pop(depth, None)
        return None

    found = dfs(0, {}, [], [])
    if found is not None and found != "stop":
        result, system = found
        return SearchResult("feasible", _cell_values(encoding, result.assignment), system, "", leaves)
    if unsure:
        return SearchResult("indeterminate", reason=unsure, leaves=leaves)
    return SearchResult("infeasible", leaves=leaves)


def _cell_values(encoding: SupportEncoding, assignment: Mapping) -> dict[CellRef, Value]:
    out: dict[CellRef, Value] = {}
    for cell, info in encoding.variables.variables.items():
        v = Fraction(assignment[cell])
        out[cell] = int(v) if info.domain == "integer" else v
    return out
