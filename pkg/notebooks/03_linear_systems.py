"""Walkthrough: the exact mixed linear solver behind the repair search.

Run with ``python notebooks/03_linear_systems.py``.

Systems mix real and integer variables and may use strict inequalities.
Answers are exact: a feasible result carries a rational witness that is
re-checked, an infeasible real system carries a certificate (a combination
of rows that reduces to a false constant inequality).
"""

from __future__ import annotations

import random

from numrepair.linsys import LinearSystem, Row
from numrepair.oracles import random_system, reference_feasible
from numrepair.solver import Feasible, SolverConfig, default_box, solve, verify

# x + y = 1 with 0 < x < y: feasible over the reals (x = 1/4, y = 3/4 for instance).
s = LinearSystem()
s.add_variable("x")
s.add_variable("y")
s.add(Row.make({"x": 1, "y": 1}, "=", 1))
s.add(Row.make({"x": -1}, "<", 0))
s.add(Row.make({"x": 1, "y": -1}, "<", 0))
result = solve(s)
print(s)
print(f"-> {result.to_dict()}  verified: {verify(s, result.assignment)}")

# Same rows with x, y integers: no integer strictly between 0 and 1/2.
t = LinearSystem()
t.add_variable("x", "integer")
t.add_variable("y", "integer")
t.extend(s.rows)
print(f"\nintegers -> {solve(t).to_dict()}")

# Real infeasibility comes with a certificate.
u = LinearSystem()
u.add_variable("x")
u.add(Row.make({"x": 2}, ">=", 3))
u.add(Row.make({"x": 1}, "<", 1))
r = solve(u)
print(f"\n2x >= 3 and x < 1 -> {r.to_dict()}")
print(f"  combined rows give {r.certificate.describe(u.rows)}, certificate valid: {r.certificate.check(u.rows)}")

# Integer search is bounded by a box derived from the coefficients; a
# tighter box can leave the answer open.
w = LinearSystem()
w.add_variable("n", "integer")
w.add(Row.make({"n": 1}, ">=", 40))
print(f"\nn >= 40: default box {default_box(w)} -> {solve(w).to_dict()}")
print(f"n >= 40 with box 5 -> {solve(w, SolverConfig(box=5)).to_dict()}")

# Random systems against enumeration plus Fourier-Motzkin elimination.
agree = sum(solve(x).feasible == reference_feasible(x) for x in (random_system(random.Random(i)) for i in range(50)))
print(f"\nrandom systems agreeing with the reference: {agree}/50")
