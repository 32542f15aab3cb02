"""Linear inequality systems over exact rationals.

Variables are arbitrary hashable keys tagged ``integer`` or ``real``.  Rows
are ``sum(coef * var) op bound`` with ``op`` one of ``<=``, ``<``, ``=``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm
from typing import Hashable, Iterable, Mapping, Optional

from .constraints import format_number

ROW_OPS = ("<=", "<", "=")


@dataclass(frozen=True)
class VarInfo:
    domain: str = "real"
    original: Optional[Fraction] = None


@dataclass(frozen=True)
class Row:
    coeffs: Mapping[Hashable, Fraction]
    op: str
    bound: Fraction
    provenance: str = ""

    def __post_init__(self) -> None:
        if self.op not in ROW_OPS:
            raise ValueError(f"row operator must be one of {ROW_OPS}, got {self.op!r}")

    @classmethod
    def make(cls, coeffs: Mapping[Hashable, object], op: str, bound: object, provenance: str = "") -> "Row":
        """Normalise ``>=``/``>`` by negation and drop zero coefficients."""
        c = {k: Fraction(v) for k, v in coeffs.items() if Fraction(v) != 0}
        b = Fraction(bound)
        if op in (">=", ">"):
            c = {k: -v for k, v in c.items()}
            b = -b
            op = "<=" if op == ">=" else "<"
        return cls(c, op, b, provenance)

    def lhs(self, assignment: Mapping[Hashable, Fraction]) -> Fraction:
        return sum((c * Fraction(assignment[k]) for k, c in self.coeffs.items()), Fraction(0))

    def holds(self, assignment: Mapping[Hashable, Fraction]) -> bool:
        v = self.lhs(assignment)
        if self.op == "<=":
            return v <= self.bound
        if self.op == "<":
            return v < self.bound
        return v == self.bound

    def scaled(self, factor: Fraction) -> "Row":
        if factor <= 0:
            raise ValueError("rows may only be scaled by positive factors")
        return Row({k: v * factor for k, v in self.coeffs.items()}, self.op, self.bound * factor, self.provenance)

    def constant_truth(self) -> bool:
        """Truth value of a row without variables."""
        if self.op == "<=":
            return 0 <= self.bound
        if self.op == "<":
            return 0 < self.bound
        return self.bound == 0

    def tightened(self) -> "Row":
        """Equivalent row over integer variables with coprime integer coefficients.

        ``a.x < b`` becomes ``a.x <= ceil(b) - 1`` and ``a.x <= b`` becomes
        ``a.x <= floor(b)``.  Only valid when every variable is integer.
        """
        if not self.coeffs:
            return self
        den = lcm(*(c.denominator for c in self.coeffs.values()))
        ints = [int(c * den) for c in self.coeffs.values()]
        g = 0
        for v in ints:
            g = gcd(g, abs(v))
        factor = Fraction(den, g)
        coeffs = {k: c * factor for k, c in self.coeffs.items()}
        b = self.bound * factor
        if self.op == "=":
            return Row(coeffs, "=", b, self.provenance)
        if self.op == "<":
            nb = -((-b.numerator) // b.denominator) - 1 if b.denominator != 1 else b - 1
            return Row(coeffs, "<=", Fraction(nb), self.provenance)
        return Row(coeffs, "<=", Fraction(b.numerator // b.denominator), self.provenance)

    def to_dict(self, name=str) -> dict:
        return {
            "coeffs": {name(k): format_number(v) for k, v in self.coeffs.items()},
            "op": self.op,
            "bound": format_number(self.bound),
            "provenance": self.provenance,
        }

    def __str__(self) -> str:
        if not self.coeffs:
            lhs = "0"
        else:
            parts = []
            for i, (k, c) in enumerate(self.coeffs.items()):
                mag = abs(c)
                term = str(k) if mag == 1 else f"{format_number(mag)}*{k}"
                if i == 0:
                    parts.append(f"-{term}" if c < 0 else term)
                else:
                    parts.append(f"{'-' if c < 0 else '+'} {term}")
            lhs = " ".join(parts)
        return f"{lhs} {self.op} {format_number(self.bound)}"


@dataclass
class LinearSystem:
    variables: dict[Hashable, VarInfo] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)

    def add_variable(self, key: Hashable, domain: str = "real", original: object = None) -> None:
        self.variables[key] = VarInfo(domain, None if original is None else Fraction(original))

    def add(self, row: Row) -> None:
        unknown = set(row.coeffs) - set(self.variables)
        if unknown:
            raise KeyError(f"row mentions undeclared variables {sorted(map(str, unknown))}")
        self.rows.append(row)

    def extend(self, rows: Iterable[Row]) -> None:
        for r in rows:
            self.add(r)

    def copy(self) -> "LinearSystem":
        return LinearSystem(dict(self.variables), list(self.rows))

    def integer_variables(self) -> list[Hashable]:
        return [k for k, v in self.variables.items() if v.domain == "integer"]

    def to_dict(self, name=str) -> dict:
        return {
            "vars": {
                name(k): {
                    "domain": v.domain,
                    "original": None if v.original is None else format_number(v.original),
                }
                for k, v in self.variables.items()
            },
            "ineqs": [r.to_dict(name) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rows)
