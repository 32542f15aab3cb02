"""Walkthrough: deciding repair existence is as hard as circuit satisfiability.

Run with ``python notebooks/02_circuits.py``.

A NOR circuit becomes a database with one tuple per gate, edge and input,
all measure values set to -1.  The constraints force every value to 0 or 1,
make each gate compute NOR of its inputs and require the output gate to be 1.
A repair exists exactly when some input assignment satisfies the circuit,
and the repaired input values are such an assignment.
"""

from __future__ import annotations

import random

from numrepair import apply_update_set
from numrepair.circuits import Circuit, brute_force_sat, encode_circuit, gen_circuit
from numrepair.linear import encode_support
from numrepair.repair import repair_exists

# A tiny circuit: g0 = NOR(g1, x1), g1 = NOR(x2).  Output 1 needs x1 = 0, x2 = 1.
circuit = Circuit(2, ((1, 2), (3,)))
inst, cs = encode_circuit(circuit)
print(circuit.describe())
for name in inst.schema.names:
    print(f"  {name}: {list(inst.rows(name))}")

answer, sample, _ = repair_exists(inst, cs, small_sample=False)
repaired = apply_update_set(inst, sample)
print(f"repair exists: {answer}")
print(f"  inputs after repair: {[tuple(r) for r in repaired.rows('input')]}")

# The linear system of a single input cell: the tuple counts towards the
# validity total when its value is outside {0, 1}, which gives one branch per
# way of being valid or invalid (0, 1, below 0 or above 1).
cell = inst.measure_cells()[-1]
branches = encode_support(inst, cs, [cell])
print(f"\nsystems for support {{{cell}}}: {len(branches)} branches")
for system in branches:
    print("  " + "; ".join(str(r) for r in system.rows if cell in r.coeffs))

# Random circuits: repair existence agrees with brute-force satisfiability.
print("\n== random circuits")
agree = 0
for seed in range(20):
    rng = random.Random(seed)
    c = gen_circuit(rng.randint(1, 4), rng.randint(1, 4), seed)
    got, _, _ = repair_exists(*encode_circuit(c), small_sample=False)
    sat = brute_force_sat(c)
    agree += got == sat
    print(f"  seed {seed:2}: sat={sat!s:5} repair={got!s:5}  {c.describe()}")
print(f"{agree}/20 agree")
