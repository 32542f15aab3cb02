"""Reference implementations used to cross-check the engines.

They share nothing with the simplex, the support encoding or the search
code: feasibility is decided by Fourier-Motzkin elimination and grid
enumeration, and minimal supports are read off an exhaustive enumeration of
all value assignments, evaluated with numpy.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np

from .constraints import (
    Add,
    And,
    AttrRef,
    Cmp,
    Const,
    ConstraintSet,
    Not,
    Or,
    Param,
    Scale,
    Sub,
)
from .dsl import parse_constraints
from .errors import ResourceError
from .evaluator import bind_params, ground_all
from .linsys import LinearSystem, Row
from .relational import CellRef, Instance, make_instance, parse_schema

# -- Fourier-Motzkin ----------------------------------------------------------

_FMRow = tuple[dict, bool, Fraction]  # coeffs, strict, bound: sum(coeffs*x) (<|<=) bound


def _fm_rows(rows: Iterable[Row]) -> list[_FMRow]:
    out = []
    for r in rows:
        coeffs = {k: Fraction(v) for k, v in r.coeffs.items() if v}
        if r.op == "=":
            out.append((coeffs, False, r.bound))
            out.append(({k: -v for k, v in coeffs.items()}, False, -r.bound))
        else:
            out.append((coeffs, r.op == "<", r.bound))
    return out


def fm_feasible(rows: Iterable[Row], max_rows: int = 20000) -> bool:
    """Real feasibility by Fourier-Motzkin elimination with strictness tracking."""
    current = _fm_rows(rows)
    while True:
        variables = {k for coeffs, _, _ in current for k in coeffs}
        if not variables:
            break
        # eliminate the variable producing the fewest combinations
        def cost(v):
            pos = sum(1 for c, _, _ in current if c.get(v, 0) > 0)
            neg = sum(1 for c, _, _ in current if c.get(v, 0) < 0)
            return pos * neg - pos - neg

        x = min(sorted(variables, key=str), key=cost)
        pos, neg, rest = [], [], []
        for row in current:
            a = row[0].get(x, 0)
            (pos if a > 0 else neg if a < 0 else rest).append(row)
        for pc, ps, pb in pos:
            for nc, ns, nb in neg:
                fp, fn = -nc[x], pc[x]  # both positive
                coeffs = {}
                for k in set(pc) | set(nc):
                    if k == x:
                        continue
                    v = fp * pc.get(k, 0) + fn * nc.get(k, 0)
                    if v:
                        coeffs[k] = v
                rest.append((coeffs, ps or ns, fp * pb + fn * nb))
        if len(rest) > max_rows:
            raise ResourceError(f"Fourier-Motzkin produced more than {max_rows} rows")
        current = rest
    return all((b > 0) if strict else (b >= 0) for _, strict, b in current)


def reference_feasible(system: LinearSystem, box: int = 5) -> bool:
    """Exact feasibility of ``system`` with integer variables restricted to ``[-box, box]``.

    Integer variables are enumerated, the remaining real system is decided by
    Fourier-Motzkin.
    """
    ints = system.integer_variables()
    if len(ints) > 6:
        raise ResourceError(f"{len(ints)} integer variables are too many to enumerate")
    for values in product(range(-box, box + 1), repeat=len(ints)):
        fixed = dict(zip(ints, (Fraction(v) for v in values)))
        rows = []
        for r in system.rows:
            coeffs = {k: c for k, c in r.coeffs.items() if k not in fixed}
            bound = r.bound - sum((c * fixed[k] for k, c in r.coeffs.items() if k in fixed), Fraction(0))
            rows.append(Row(coeffs, r.op, bound))
        if fm_feasible(rows):
            return True
    return False


def grid_feasible(system: LinearSystem, box: int = 5) -> Optional[dict]:
    """First point of the integer grid ``[-box, box]^n`` satisfying every row (all variables)."""
    keys = list(system.variables)
    for values in product(range(-box, box + 1), repeat=len(keys)):
        point = dict(zip(keys, (Fraction(v) for v in values)))
        if all(r.holds(point) for r in system.rows):
            return point
    return None


def random_system(rng: random.Random, max_vars: int = 4, max_rows: int = 6, bound_ints: int = 5) -> LinearSystem:
    """Random mixed system with coefficients ``p/q``, ``|p|, q <= 9``.

    Integer variables get explicit rows ``-bound_ints <= x <= bound_ints`` so
    that grid enumeration is an exact reference.
    """
    s = LinearSystem()
    n = rng.randint(1, max_vars)
    for j in range(n):
        s.add_variable(f"x{j}", rng.choice(["real", "integer"]))
    keys = list(s.variables)
    for _ in range(rng.randint(1, max_rows)):
        coeffs = {k: Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for k in keys if rng.random() < 0.7}
        bound = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        s.add(Row.make(coeffs, rng.choice(["<=", "<", "=", ">=", ">"]), bound))
    for k in s.integer_variables():
        s.add(Row.make({k: 1}, "<=", bound_ints, "box"))
        s.add(Row.make({k: -1}, "<=", bound_ints, "box"))
    return s


# -- brute-force repairs ------------------------------------------------------


def _np_operand(o, cells: dict, arrays, row: tuple, rel, params):
    if isinstance(o, Const):
        return o.value
    if isinstance(o, Param):
        return params[o.name]
    idx = cells.get(o.name)
    if idx is not None:
        return arrays[idx]
    return row[rel.index(o.name)]


def _np_compare(op: str, a, b):
    if isinstance(a, str) or isinstance(b, str):
        if not (isinstance(a, str) and isinstance(b, str)):
            if op in ("=", "!="):
                return op == "!="
            raise ValueError("cannot order a string and a number")
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _np_condition(cond, cells, arrays, row, rel, params):
    if cond is None:
        return True
    if isinstance(cond, Cmp):
        return _np_compare(
            cond.op,
            _np_operand(cond.left, cells, arrays, row, rel, params),
            _np_operand(cond.right, cells, arrays, row, rel, params),
        )
    if isinstance(cond, Not):
        return np.logical_not(_np_condition(cond.item, cells, arrays, row, rel, params))
    parts = [_np_condition(c, cells, arrays, row, rel, params) for c in cond.items]
    combine = np.logical_and if isinstance(cond, And) else np.logical_or
    out = parts[0]
    for p in parts[1:]:
        out = combine(out, p)
    return out


def _np_expr(e, cells, arrays, row, rel):
    if isinstance(e, Const):
        return int(e.value)
    if isinstance(e, AttrRef):
        idx = cells.get(e.name)
        return arrays[idx] if idx is not None else int(row[rel.index(e.name)])
    if isinstance(e, Scale):
        if Fraction(e.coef).denominator != 1:
            raise ValueError("the brute-force oracle only handles integer scale factors")
        return int(e.coef) * _np_expr(e.expr, cells, arrays, row, rel)
    left = _np_expr(e.left, cells, arrays, row, rel)
    right = _np_expr(e.right, cells, arrays, row, rel)
    return left + right if isinstance(e, Add) else left - right


def consistent_mask(instance: Instance, cs: ConstraintSet, cells: Sequence[CellRef], grid: np.ndarray) -> np.ndarray:
    """For each row of ``grid`` (values of ``cells``), does the updated instance satisfy ``cs``?

    Measure values must be integers and all coefficients integral.
    """
    arrays = [np.ascontiguousarray(grid[:, j]) for j in range(grid.shape[1])]
    ok = np.ones(grid.shape[0], dtype=bool)
    for g in ground_all(instance, cs):
        lhs = np.zeros(grid.shape[0], dtype=np.int64)
        for term in g.terms:
            f = cs.function(term.function)
            rel = instance.schema[f.relation]
            params = bind_params(f, instance.schema, term.args)
            if Fraction(term.coef).denominator != 1:
                raise ValueError("the brute-force oracle only handles integer coefficients")
            for r, row in enumerate(instance.rows(rel.name)):
                local = {c.attribute: j for j, c in enumerate(cells) if c.relation == rel.name and c.row == r}
                sel = _np_condition(f.condition, local, arrays, row, rel, params)
                val = _np_expr(f.body, local, arrays, row, rel)
                lhs = lhs + int(term.coef) * np.where(sel, val, 0)
        k = Fraction(g.bound)
        if k.denominator != 1:
            raise ValueError("the brute-force oracle only handles integer bounds")
        k = int(k)
        if g.cmp == "<=":
            ok &= lhs <= k
        elif g.cmp == ">=":
            ok &= lhs >= k
        else:
            ok &= lhs == k
    return ok


def brute_force_supports(
    instance: Instance,
    cs: ConstraintSet,
    box: int = 5,
    max_cells: int = 6,
) -> tuple[set[frozenset], set[frozenset]]:
    """``(set-minimal supports, card-minimal supports)`` by enumerating ``[-box, box]^cells``.

    Empty families mean no repair exists inside the box; a consistent
    instance yields ``{frozenset()}`` for both.
    """
    cells = instance.measure_cells()
    if len(cells) > max_cells:
        raise ResourceError(f"{len(cells)} measure cells exceed the brute-force limit of {max_cells}")
    values = np.arange(-box, box + 1, dtype=np.int64)
    if cells:
        grid = np.array(np.meshgrid(*([values] * len(cells)), indexing="ij")).reshape(len(cells), -1).T
    else:
        grid = np.zeros((1, 0), dtype=np.int64)
    original = np.array([int(instance.value(c)) for c in cells], dtype=np.int64)
    ok = consistent_mask(instance, cs, cells, grid)
    changed = (grid[ok] != original).astype(np.int64)
    weights = np.left_shift(1, np.arange(len(cells), dtype=np.int64))
    masks = {int(m) for m in np.unique(changed @ weights)} if ok.any() else set()
    minimal = [m for m in masks if not any(o != m and o & m == o for o in masks)]
    as_sets = {frozenset(cells[i] for i in range(len(cells)) if m >> i & 1) for m in minimal}
    if not as_sets:
        return set(), set()
    k = min(len(s) for s in as_sets)
    return as_sets, {s for s in as_sets if len(s) == k}


def random_bounded_instance(seed: int, box: int = 5) -> tuple[Instance, ConstraintSet]:
    """Small integer instance with 1-3 random aggregate constraints.

    Every measure cell is additionally bounded to ``[-box, box]`` by
    per-tuple constraints, so the repair space coincides with the
    brute-force grid.
    """
    rng = random.Random(seed)
    two = rng.random() < 0.5
    nrows = rng.randint(2, 3) if two else rng.randint(2, 6)
    schema_text = (
        "R(Id: integer, Grp: integer, A: integer measure, B: integer measure)"
        if two
        else "R(Id: integer, Grp: integer, A: integer measure)"
    )
    schema = parse_schema(schema_text)
    rows = []
    for i in range(nrows):
        rows.append((i, rng.randint(0, 1), *(rng.randint(-box, box) for _ in range(2 if two else 1))))
    instance = make_instance(schema, {"R": rows})
    measures = ["A", "B"] if two else ["A"]

    funcs = [f"function cell{m}(k) on R: sum({m}) where Id = k" for m in measures]
    constraints = []
    for m in measures:
        constraints.append(f"rule box{m}_hi: R(k, _, {'_, _' if two else '_'}) -> cell{m}(k) <= {box}")
        constraints.append(f"rule box{m}_lo: R(k, _, {'_, _' if two else '_'}) -> cell{m}(k) >= {-box}")

    def random_body() -> str:
        choice = rng.random()
        if two and choice < 0.3:
            return f"A {rng.choice(['+', '-'])} B"
        if choice < 0.45:
            return f"{rng.choice([2, 3, -1])} * ({rng.choice(measures)})"
        if choice < 0.6:
            return "1"
        return rng.choice(measures)

    def random_condition(with_group: bool) -> str:
        parts = []
        if with_group:
            parts.append("Grp = g")
        if rng.random() < 0.5:
            m = rng.choice(measures)
            op = rng.choice(["=", "!=", "<", "<=", ">", ">="])
            parts.append(f"{m} {op} {rng.randint(-2, 2)}")
        return " and ".join(parts)

    n_constraints = rng.randint(1, 3)
    for c in range(n_constraints):
        grouped = rng.random() < 0.5
        terms = []
        for t in range(rng.randint(1, 2)):
            name = f"f{c}_{t}"
            cond = random_condition(grouped)
            params = "g" if grouped else ""
            text = f"function {name}({params}) on R: sum({random_body()})"
            if cond:
                text += f" where {cond}"
            funcs.append(text)
            coef = rng.choice([1, 1, -1, 2])
            terms.append((coef, f"{name}({'g' if grouped else ''})"))
        lhs = " ".join(
            (f"{'-' if k < 0 else ''}{abs(k)} * {call}" if i == 0 else f"{'-' if k < 0 else '+'} {abs(k)} * {call}")
            for i, (k, call) in enumerate(terms)
        )
        cmp = rng.choice(["<=", ">=", "="])
        bound = rng.randint(-box, box)
        if grouped:
            atom = f"R(_, g, {'_, _' if two else '_'})"
            constraints.append(f"rule r{c}: {atom} -> {lhs} {cmp} {bound}")
        else:
            constraints.append(f"rule r{c}: {lhs} {cmp} {bound}")
    text = "\n".join(funcs + constraints) + "\n"
    return instance, parse_constraints(text, schema)


# -- consistent answers ---------------------------------------------------------


def _query_mask(instance: Instance, cells: Sequence[CellRef], grid: np.ndarray, relation: str, values) -> np.ndarray:
    """For each grid row: does the updated instance contain the tuple ``relation(values)``?"""
    rel = instance.schema[relation]
    holds = np.zeros(grid.shape[0], dtype=bool)
    col = {c: j for j, c in enumerate(cells)}
    for r, row in enumerate(instance.rows(relation)):
        match = np.ones(grid.shape[0], dtype=bool)
        for i, attr in enumerate(rel.attributes):
            c = CellRef(relation, r, attr.name)
            if c in col:
                match &= grid[:, col[c]] == values[i]
            elif row[i] != values[i]:
                match[:] = False
        holds |= match
    return holds


def brute_force_cqa(instance: Instance, cs: ConstraintSet, relation: str, values, semantics: str,
                    box: int = 5, max_cells: int = 6) -> Optional[bool]:
    """Consistent answer by enumerating every assignment in ``[-box, box]^cells``.

    Minimal repairs are the consistent assignments whose set of changed
    cells is a minimal support.  ``None`` when no repair exists in the box.
    """
    cells = instance.measure_cells()
    if len(cells) > max_cells:
        raise ResourceError(f"{len(cells)} measure cells exceed the brute-force limit of {max_cells}")
    vals = np.arange(-box, box + 1, dtype=np.int64)
    grid = np.array(np.meshgrid(*([vals] * len(cells)), indexing="ij")).reshape(len(cells), -1).T
    original = np.array([int(instance.value(c)) for c in cells], dtype=np.int64)
    ok = consistent_mask(instance, cs, cells, grid)
    if not ok.any():
        return None
    changed = (grid != original).astype(np.int64) @ np.left_shift(1, np.arange(len(cells), dtype=np.int64))
    masks = {int(m) for m in np.unique(changed[ok])}
    minimal = {m for m in masks if not any(o != m and o & m == o for o in masks)}
    if semantics == "card":
        k = min(bin(m).count("1") for m in minimal)
        minimal = {m for m in minimal if bin(m).count("1") == k}
    repairs = ok & np.isin(changed, list(minimal))
    return bool(_query_mask(instance, cells, grid[repairs], relation, values).all())


def window_grid(instance: Instance, cells: Sequence[CellRef], radius: int, keep: bool = False) -> np.ndarray:
    """Integer values within ``radius`` of each cell's value; the value itself only if ``keep``."""
    axes = []
    for c in cells:
        v = int(instance.value(c))
        axis = np.arange(v - radius, v + radius + 1, dtype=np.int64)
        axes.append(axis if keep else axis[axis != v])
    if not axes:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(cells), -1).T


def window_support_feasible(instance: Instance, cs: ConstraintSet, support: Sequence[CellRef], radius: int) -> bool:
    """Some values within ``radius`` (cells may keep their value) make the instance consistent."""
    cells = list(support)
    return bool(consistent_mask(instance, cs, cells, window_grid(instance, cells, radius, keep=True)).any())


def window_support_cqa(instance: Instance, cs: ConstraintSet, supports: Iterable[Sequence[CellRef]],
                       relation: str, values, radius: int) -> Optional[bool]:
    """Consistent answer restricted to repairs over the given minimal supports.

    Every cell of a support is changed to a value within ``radius`` of its
    current one.  ``None`` when no support admits a repair in the window.
    """
    seen = False
    for support in supports:
        cells = list(support)
        grid = window_grid(instance, cells, radius)
        ok = consistent_mask(instance, cs, cells, grid)
        if not ok.any():
            continue
        seen = True
        if not _query_mask(instance, cells, grid[ok], relation, values).all():
            return False
    return True if seen else None
