"""Exact feasibility for mixed integer/real linear systems.

The real relaxation is decided by a two-phase simplex over ``Fraction`` with
Bland's rule.  Strict rows get a shared slack ``eps`` that the second phase
maximises (capped at 1): the strict system is feasible iff the optimum is
positive, and the optimal point is itself a strictly feasible rational
witness, so no epsilon constant is ever guessed.  Infeasible relaxations come
with Farkas multipliers read off the final tableau.

Integer variables are handled by depth-first branch and bound inside a box
``|x| <= B``.  When the search fails only because of the box, the answer is
``BoundExhausted`` rather than ``Infeasible``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, lcm
from typing import Hashable, Mapping, Optional, Union

from .constraints import format_number
from .linsys import LinearSystem, Row, VarInfo

ZERO = Fraction(0)
ONE = Fraction(1)
BOX_RETRY_FACTOR = 16


@dataclass(frozen=True)
class SolverConfig:
    """Integer search limits.

    ``box`` fixes the per-variable bound B; when ``None`` it defaults to
    ``box_multiplier * (1 + sum|coefficients| + sum|bounds|)``.
    """

    box: Optional[int] = None
    box_multiplier: int = 2
    max_nodes: int = 20000


@dataclass(frozen=True)
class Certificate:
    """Non-negative combination of rows that reduces to ``0 <= -c`` or ``0 < 0``.

    Multipliers of ``=`` rows may be negative.
    """

    multipliers: dict[int, Fraction]

    def combined(self, rows: list[Row]) -> tuple[dict, Fraction, bool]:
        coeffs: dict = {}
        bound = ZERO
        strict = False
        for i, m in self.multipliers.items():
            r = rows[i]
            for k, c in r.coeffs.items():
                coeffs[k] = coeffs.get(k, ZERO) + m * c
            bound += m * r.bound
            if r.op == "<" and m > 0:
                strict = True
        return {k: v for k, v in coeffs.items() if v}, bound, strict

    def check(self, rows: list[Row]) -> bool:
        for i, m in self.multipliers.items():
            if rows[i].op != "=" and m < 0:
                return False
        coeffs, bound, strict = self.combined(rows)
        if coeffs:
            return False
        return bound < 0 or (bound == 0 and strict)

    def describe(self, rows: list[Row]) -> str:
        _, bound, strict = self.combined(rows)
        return f"0 {'<' if strict and bound == 0 else '<='} {format_number(bound)}"


@dataclass(frozen=True)
class Feasible:
    assignment: dict

    feasible = True

    def to_dict(self, name=str) -> dict:
        return {"status": "feasible", "witness": {name(k): format_number(v) for k, v in self.assignment.items()}}


@dataclass(frozen=True)
class Infeasible:
    certificate: Optional[Certificate] = None
    reason: str = ""

    feasible = False

    def to_dict(self, name=str) -> dict:
        out: dict = {"status": "infeasible", "reason": self.reason}
        if self.certificate is not None:
            out["certificate"] = {str(i): format_number(m) for i, m in self.certificate.multipliers.items()}
        return out


@dataclass(frozen=True)
class BoundExhausted:
    box: int
    reason: str = ""

    feasible = None

    def to_dict(self, name=str) -> dict:
        return {"status": "bound exhausted", "box": self.box, "reason": self.reason}


SolveResult = Union[Feasible, Infeasible, BoundExhausted]


# -- simplex ------------------------------------------------------------------


@dataclass
class _LPResult:
    feasible: bool
    x: list[Fraction] = field(default_factory=list)
    multipliers: list[Fraction] = field(default_factory=list)


class _Tableau:
    """Sparse simplex tableau: each row is a dict column -> coefficient."""

    def __init__(self) -> None:
        self.rows: list[dict[int, Fraction]] = []
        self.rhs: list[Fraction] = []
        self.basis: list[int] = []
        self.obj: dict[int, Fraction] = {}
        self.obj_value = ZERO

    def pivot(self, r: int, k: int) -> None:
        row = self.rows[r]
        p = row[k]
        if p != 1:
            inv = 1 / p
            for c in row:
                row[c] *= inv
            self.rhs[r] *= inv
        row[k] = ONE
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other.get(k)
            if f:
                for c, v in row.items():
                    nv = other.get(c, ZERO) - f * v
                    if nv:
                        other[c] = nv
                    else:
                        other.pop(c, None)
                self.rhs[i] -= f * self.rhs[r]
        f = self.obj.get(k)
        if f:
            for c, v in row.items():
                nv = self.obj.get(c, ZERO) - f * v
                if nv:
                    self.obj[c] = nv
                else:
                    self.obj.pop(c, None)
            self.obj_value -= f * self.rhs[r]
        self.basis[r] = k

    def optimize(self, forbidden: set[int]) -> None:
        """Minimise with Bland's rule; the problems posed here are never unbounded."""
        while True:
            entering = None
            for c in sorted(self.obj):
                if self.obj[c] < 0 and c not in forbidden:
                    entering = c
                    break
            if entering is None:
                return
            best = None
            for i, row in enumerate(self.rows):
                a = row.get(entering)
                if a is not None and a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                raise RuntimeError("unbounded simplex subproblem")
            self.pivot(best[1], entering)

    def set_objective(self, costs: dict[int, Fraction]) -> None:
        """Install reduced costs for ``min sum(costs[c] * col_c)``."""
        obj = dict(costs)
        value = ZERO
        for i, b in enumerate(self.basis):
            cb = costs.get(b)
            if cb:
                for c, v in self.rows[i].items():
                    nv = obj.get(c, ZERO) - cb * v
                    if nv:
                        obj[c] = nv
                    else:
                        obj.pop(c, None)
                value -= cb * self.rhs[i]
        self.obj = obj
        self.obj_value = value  # equals -(objective value)

    def value(self, col: int) -> Fraction:
        for i, b in enumerate(self.basis):
            if b == col:
                return self.rhs[i]
        return ZERO


def _lp(rows: list[tuple[dict[int, Fraction], bool, Fraction]], nvars: int) -> _LPResult:
    """Decide ``{a.x <= b}`` (or ``<`` when the flag is set) over free real ``x``.

    Returns a strictly feasible point, or non-negative multipliers proving
    infeasibility.
    """
    m = len(rows)
    has_strict = any(strict for _, strict, _ in rows)
    eps = 2 * nvars
    slack0 = eps + 1
    art0 = slack0 + m + 1
    t = _Tableau()
    signs: list[int] = []
    init_cols: list[int] = []
    art_cols: set[int] = set()
    all_rows = list(rows)
    if has_strict:
        all_rows.append(({}, False, ONE))  # eps <= 1
    for i, (coeffs, strict, b) in enumerate(all_rows):
        row: dict[int, Fraction] = {}
        for j, a in coeffs.items():
            row[2 * j] = a
            row[2 * j + 1] = -a
        if has_strict and (strict or i == m):
            row[eps] = ONE
        row[slack0 + i] = ONE
        sign = 1
        if b < 0:
            sign = -1
            row = {c: -v for c, v in row.items()}
            b = -b
            art = art0 + i
            row[art] = ONE
            art_cols.add(art)
            basic = art
        else:
            basic = slack0 + i
        t.rows.append(row)
        t.rhs.append(b)
        t.basis.append(basic)
        signs.append(sign)
        init_cols.append(basic)

    if art_cols:
        t.set_objective({c: ONE for c in art_cols})
        t.optimize(forbidden=set())
        if t.obj_value != 0:
            # y_i = c_k - reduced_k on the initial basis column; mu_i = -y_i * sign_i
            mult = []
            for i in range(m):
                k = init_cols[i]
                ck = ONE if k in art_cols else ZERO
                y = ck - t.obj.get(k, ZERO)
                mult.append(-y * signs[i])
            return _LPResult(False, multipliers=mult)
        # drive zero-level artificials out of the basis
        for i, b in enumerate(t.basis):
            if b in art_cols:
                for c in sorted(t.rows[i]):
                    if c not in art_cols and t.rows[i][c] != 0:
                        t.pivot(i, c)
                        break

    if has_strict:
        t.set_objective({eps: -ONE})
        t.optimize(forbidden=art_cols)
        if t.value(eps) <= 0:
            mult = []
            for i in range(m):
                y = -t.obj.get(init_cols[i], ZERO)
                mult.append(-y * signs[i])
            return _LPResult(False, multipliers=mult)

    x = [t.value(2 * j) - t.value(2 * j + 1) for j in range(nvars)]
    return _LPResult(True, x=x)


# -- public API ---------------------------------------------------------------


def _split(rows: list[Row]) -> tuple[list[tuple[Row, int, int]], list[Row]]:
    """Turn ``=`` rows into two ``<=`` rows, remembering origin and sign."""
    out = []
    plain = []
    for i, r in enumerate(rows):
        if r.op == "=":
            out.append((Row(dict(r.coeffs), "<=", r.bound, r.provenance), i, 1))
            out.append((Row({k: -v for k, v in r.coeffs.items()}, "<=", -r.bound, r.provenance), i, -1))
        else:
            out.append((r, i, 1))
    plain = [r for r, _, _ in out]
    return out, plain


def relaxation(rows: list[Row], keys: list[Hashable]) -> tuple[Optional[dict], Optional[Certificate]]:
    """Solve the real relaxation; returns ``(point, None)`` or ``(None, certificate)``."""
    index = {k: j for j, k in enumerate(keys)}
    split, plain = _split(rows)
    lp_rows = [({index[k]: c for k, c in r.coeffs.items()}, r.op == "<", r.bound) for r in plain]
    res = _lp(lp_rows, len(keys))
    if res.feasible:
        return {k: res.x[j] for j, k in enumerate(keys)}, None
    mult: dict[int, Fraction] = {}
    for (r, origin, sign), m in zip(split, res.multipliers):
        if m:
            mult[origin] = mult.get(origin, ZERO) + sign * m
    return None, Certificate({i: m for i, m in mult.items() if m})


def default_box(system: LinearSystem, multiplier: int = 2) -> int:
    """``multiplier * (1 + sum|a| + sum|b|)`` over rows scaled to integer coefficients."""
    total = ONE
    for r in system.rows:
        den = lcm(*(c.denominator for c in r.coeffs.values()), r.bound.denominator)
        total += sum((abs(c) * den for c in r.coeffs.values()), ZERO) + abs(r.bound) * den
    return int(multiplier * total)


def verify(system: LinearSystem, assignment: Mapping[Hashable, object]) -> bool:
    """True iff ``assignment`` satisfies every row exactly and respects integer domains."""
    missing = [k for k in system.variables if k not in assignment]
    if missing:
        raise KeyError(f"assignment misses variables {sorted(map(str, missing))}")
    values = {k: Fraction(v) for k, v in assignment.items()}
    for k, info in system.variables.items():
        if info.domain == "integer" and values[k].denominator != 1:
            return False
    return all(r.holds(values) for r in system.rows)


def solve(system: LinearSystem, config: Optional[SolverConfig] = None) -> SolveResult:
    """Decide feasibility of ``system`` exactly; every ``Feasible`` witness is verified."""
    config = config or SolverConfig()
    keys = list(system.variables)
    rows = list(system.rows)
    for i, r in enumerate(rows):
        if not r.coeffs and not r.constant_truth():
            sign = -ONE if r.op == "=" and r.bound > 0 else ONE
            return Infeasible(Certificate({i: sign}), f"constant row violated: {r}")
    point, cert = relaxation(rows, keys)
    if point is None:
        return Infeasible(cert, "real relaxation infeasible")
    if not system.integer_variables():
        result = Feasible(point)
    else:
        result = _solve_integer(system, config)
    if isinstance(result, Feasible) and not verify(system, result.assignment):
        raise AssertionError("solver produced a witness that does not verify")
    return result


def _integer_rows(system: LinearSystem) -> list[Row]:
    out = []
    for r in system.rows:
        if r.coeffs and all(system.variables[k].domain == "integer" for k in r.coeffs):
            out.append(r.tightened())
        else:
            out.append(r)
    return out


Substitution = tuple[Hashable, dict, Fraction]


def _substitute(row: Row, var: Hashable, coeffs: dict, const: Fraction) -> Row:
    a = row.coeffs.get(var)
    if not a:
        return row
    new = {k: v for k, v in row.coeffs.items() if k != var}
    for k, c in coeffs.items():
        nv = new.get(k, ZERO) + a * c
        if nv:
            new[k] = nv
        else:
            new.pop(k, None)
    return Row(new, row.op, row.bound - a * const, row.provenance)


def presolve(system: LinearSystem) -> tuple[Optional[LinearSystem], list[Substitution], str]:
    """Eliminate variables through equality rows.

    Real variables are eliminated from any equality.  In a pure-integer
    equality a variable with tightened coefficient +-1 is eliminated directly;
    otherwise the smallest coefficient ``a`` is reduced Euclid-style by
    writing ``x = t - sum(floor(a_i / a) x_i) + floor(b / a)`` with a fresh
    integer ``t``, until a unit coefficient appears.  Returns
    ``(None, [], reason)`` when a contradiction (including a failed
    integrality test) is found.
    """
    variables = dict(system.variables)
    rows = list(system.rows)
    subs: list[Substitution] = []
    fresh = 0
    while True:
        chosen = None
        for idx, r in enumerate(rows):
            if r.op != "=" or not r.coeffs:
                continue
            if all(variables[k].domain == "integer" for k in r.coeffs):
                t = r.tightened()
                if t.bound.denominator != 1:
                    return None, [], f"no integer solution of {r}"
                unit = next((k for k, c in t.coeffs.items() if abs(c) == 1), None)
                chosen = (idx, t, unit)
            else:
                real = next(k for k in r.coeffs if variables[k].domain != "integer")
                chosen = (idx, r, real)
            break
        if chosen is None:
            break
        idx, r, var = chosen
        if var is None:
            # no unit coefficient: shrink coefficients modulo the smallest one
            var = min(r.coeffs, key=lambda k: abs(r.coeffs[k]))
            sign = 1 if r.coeffs[var] > 0 else -1
            a = r.coeffs[var] * sign
            aux = ("_aux", fresh)
            fresh += 1
            variables[aux] = VarInfo("integer")
            coeffs = {k: -Fraction(floor(c * sign / a)) for k, c in r.coeffs.items() if k != var}
            coeffs[aux] = ONE
            const = Fraction(floor(r.bound * sign / a))
            subs.append((var, coeffs, const))
            del variables[var]
            rows = [_substitute(x, var, coeffs, const) for x in rows]
        else:
            a = r.coeffs[var]
            coeffs = {k: -c / a for k, c in r.coeffs.items() if k != var}
            const = r.bound / a
            subs.append((var, coeffs, const))
            del variables[var]
            rows = [_substitute(x, var, coeffs, const) for i, x in enumerate(rows) if i != idx]
        for x in rows:
            if not x.coeffs and not x.constant_truth():
                return None, [], f"contradiction after eliminating {var}: {x}"
        rows = [x for x in rows if x.coeffs]
    reduced = LinearSystem(variables, rows)
    return reduced, subs, ""


def _back_substitute(assignment: dict, subs: list[Substitution]) -> dict:
    out = dict(assignment)
    for var, coeffs, const in reversed(subs):
        out[var] = const + sum((c * out[k] for k, c in coeffs.items()), ZERO)
    return out


def _solve_integer(system: LinearSystem, config: SolverConfig) -> SolveResult:
    box = config.box if config.box is not None else default_box(system, config.box_multiplier)
    reduced, subs, reason = presolve(system)
    if reduced is None:
        return Infeasible(None, reason)
    result = _branch_and_bound(reduced, box, config)
    if isinstance(result, BoundExhausted) and config.box is None and not result.reason.startswith("node"):
        # the default box is a heuristic; widen it once before giving up
        result = _branch_and_bound(reduced, box * BOX_RETRY_FACTOR, config)
    if isinstance(result, Feasible):
        full = _back_substitute(result.assignment, subs)
        return Feasible({k: full[k] for k in system.variables})
    return result


def _branch_and_bound(system: LinearSystem, box: int, config: SolverConfig) -> SolveResult:
    keys = list(system.variables)
    ints = system.integer_variables()
    base = _integer_rows(system)
    for r in base:
        if r.op == "=" and all(system.variables[k].domain == "integer" for k in r.coeffs) and r.bound.denominator != 1:
            return Infeasible(None, f"no integer solution of {r}")
    if not ints:
        point, _ = relaxation(base, keys)
        return Feasible(point) if point is not None else Infeasible(None, "reduced relaxation infeasible")
    box_rows = []
    for k in ints:
        box_rows.append(Row({k: ONE}, "<=", Fraction(box), "box"))
        box_rows.append(Row({k: -ONE}, "<=", Fraction(box), "box"))
    stack: list[list[Row]] = [[]]
    nodes = 0
    box_hit = False
    while stack:
        branch = stack.pop()
        nodes += 1
        if nodes > config.max_nodes:
            return BoundExhausted(box, f"node limit {config.max_nodes} reached")
        point, _ = relaxation(base + branch + box_rows, keys)
        if point is None:
            if not box_hit:
                unboxed, _ = relaxation(base + branch, keys)
                if unboxed is not None:
                    box_hit = True
            continue
        frac = next((k for k in ints if point[k].denominator != 1), None)
        if frac is None:
            return Feasible(point)
        v = point[frac]
        lo = Fraction(floor(v))
        stack.append([*branch, Row({frac: -ONE}, "<=", -(lo + 1), "branch")])
        stack.append([*branch, Row({frac: ONE}, "<=", lo, "branch")])
    if box_hit:
        return BoundExhausted(box, f"no integer point with |x| <= {box}")
    return Infeasible(None, "branch and bound found no integer point")


def dump_result(result: SolveResult, name=str) -> str:
    return json.dumps(result.to_dict(name), indent=2)
