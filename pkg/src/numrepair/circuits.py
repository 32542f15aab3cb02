"""NOR circuits and their encoding as a repair problem.

A circuit is satisfiable iff the database built by ``encode_circuit`` has a
repair: every measure cell starts at -1 ("undefined"), the constraints force
all gate and input values into {0, 1}, make every gate compute the NOR of its
incoming edges, and require the output gate (identifier 0) to be 1.

Identifiers: gate ``i`` has id ``i`` (0 is the output), input ``j`` has id
``num_gates + j``.  Gate ``i`` may only read inputs and gates with a larger
id, which keeps the graph acyclic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product
from typing import Sequence

from .constraints import ConstraintSet
from .dsl import parse_constraints
from .errors import ResourceError
from .relational import Instance, Schema, make_instance, parse_schema

MAX_BRUTE_FORCE_INPUTS = 20

CIRCUIT_SCHEMA = """\
gate(IDGate: integer, norVal: integer measure, orVal: integer measure)
gateInput(IDGate: integer, IDIngoing: integer, Val: integer measure)
input(IDInput: integer, Val: integer measure)
"""

CIRCUIT_CONSTRAINTS = """\
function NORVal(x) on gate: sum(norVal) where IDGate = x
function ORVal(x) on gate: sum(orVal) where IDGate = x
function IngoingVal(x, y) on gateInput: sum(Val) where IDGate = x and IDIngoing = y
function IngoingSum(x) on gateInput: sum(Val) where IDGate = x
function InputVal(x) on input: sum(Val) where IDInput = x
function ValidInput() on input: sum(1) where Val != 0 and Val != 1
function ValidGate() on gate: sum(1) where (orVal != 0 and orVal != 1) or (norVal != 0 and norVal != 1)
# every value is a truth value
rule valid: ValidInput() + ValidGate() = 0
# orVal and norVal are complementary
rule complement: gate(x, _, _) -> ORVal(x) + NORVal(x) = 1
# orVal is 0 when all incoming values are 0
rule or_upper: gate(x, _, _) -> ORVal(x) - IngoingSum(x) <= 0
# orVal is 1 when some incoming value is 1
rule or_lower: gateInput(x, y, _) -> IngoingVal(x, y) - ORVal(x) <= 0
# an edge carries the value of its source
rule copy: gateInput(x, y, _) -> IngoingVal(x, y) - NORVal(y) - InputVal(y) = 0
# the output gate is true
rule output: NORVal(0) = 1
"""


@dataclass(frozen=True)
class Circuit:
    """``gates[i]`` lists the node ids feeding gate ``i``.

    Duplicates are allowed; the database encoding keeps one edge per pair.
    """

    num_inputs: int
    gates: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.gates:
            raise ValueError("a circuit needs at least one gate")
        for i, incoming in enumerate(self.gates):
            if not incoming:
                raise ValueError(f"gate {i} has no incoming edge")
            for src in incoming:
                if not (i < src < self.num_nodes):
                    raise ValueError(f"gate {i} reads node {src}, which is not a later gate or an input")

    @property
    def num_gates(self) -> int:
        return len(self.gates)

    @property
    def num_nodes(self) -> int:
        return self.num_gates + self.num_inputs

    def input_id(self, j: int) -> int:
        return self.num_gates + j

    def evaluate(self, inputs: Sequence[int]) -> int:
        """Value of the output gate for 0/1 ``inputs``."""
        values = [0] * self.num_nodes
        for j, v in enumerate(inputs):
            values[self.input_id(j)] = v
        for i in reversed(range(self.num_gates)):
            values[i] = 0 if any(values[s] for s in self.gates[i]) else 1
        return values[0]

    def describe(self) -> str:
        def name(node: int) -> str:
            return f"g{node}" if node < self.num_gates else f"x{node - self.num_gates + 1}"

        return "; ".join(
            f"g{i} = NOR({', '.join(name(s) for s in incoming)})" for i, incoming in enumerate(self.gates)
        )


def gen_circuit(num_gates: int, num_inputs: int, seed: int) -> Circuit:
    """Random circuit; each gate reads 1-3 nodes (with repetition) among inputs and later gates."""
    if num_gates < 1 or num_inputs < 1:
        raise ValueError("a circuit needs at least one gate and one input")
    rng = random.Random(seed)
    gates: list[tuple[int, ...]] = [()] * num_gates
    total = num_gates + num_inputs
    for i in reversed(range(num_gates)):
        fan_in = rng.randint(1, 3)
        gates[i] = tuple(rng.randrange(i + 1, total) for _ in range(fan_in))
    return Circuit(num_inputs, tuple(gates))


def brute_force_sat(circuit: Circuit) -> bool:
    """Does some input assignment make the output gate 1?"""
    if circuit.num_inputs > MAX_BRUTE_FORCE_INPUTS:
        raise ResourceError(
            f"{circuit.num_inputs} inputs exceed the enumeration limit of {MAX_BRUTE_FORCE_INPUTS}"
        )
    return any(circuit.evaluate(bits) for bits in product((0, 1), repeat=circuit.num_inputs))


def circuit_schema() -> Schema:
    return parse_schema(CIRCUIT_SCHEMA)


def encode_circuit(circuit: Circuit) -> tuple[Instance, ConstraintSet]:
    schema = circuit_schema()
    data = {
        "gate": [(i, -1, -1) for i in range(circuit.num_gates)],
        # repeated inputs of a gate become one edge: NOR(x, x) = NOR(x)
        "gateInput": [(i, src, -1) for i, incoming in enumerate(circuit.gates) for src in sorted(set(incoming))],
        "input": [(circuit.input_id(j), -1) for j in range(circuit.num_inputs)],
    }
    return make_instance(schema, data), parse_constraints(CIRCUIT_CONSTRAINTS, schema)
