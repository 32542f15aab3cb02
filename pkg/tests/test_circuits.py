from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numrepair.circuits import (
    MAX_BRUTE_FORCE_INPUTS,
    Circuit,
    brute_force_sat,
    encode_circuit,
    gen_circuit,
)
from numrepair.errors import ResourceError
from numrepair.evaluator import check
from numrepair.relational import apply_update_set
from numrepair.repair import repair_exists


def test_generated_structure():
    c = gen_circuit(3, 2, seed=1)
    assert c.num_gates == 3 and c.num_inputs == 2
    for i, incoming in enumerate(c.gates):
        assert 1 <= len(incoming) <= 3
        assert all(i < src < c.num_nodes for src in incoming)
    assert gen_circuit(3, 2, seed=1) == c


def test_encoding_tables():
    c = gen_circuit(3, 2, seed=1)
    inst, cs = encode_circuit(c)
    assert [r[0] for r in inst.rows("gate")] == [0, 1, 2]
    assert [r[0] for r in inst.rows("input")] == [3, 4]
    edges = [(r[0], r[1]) for r in inst.rows("gateInput")]
    assert edges == sorted({(i, s) for i, incoming in enumerate(c.gates) for s in incoming})
    assert all(inst.value(x) == -1 for x in inst.measure_cells())
    assert not check(inst, cs).consistent


def test_duplicate_edges_collapse():
    inst, _ = encode_circuit(Circuit(1, ((1, 1, 1),)))
    assert [tuple(r) for r in inst.rows("gateInput")] == [(0, 1, -1)]


def test_invalid_circuits():
    with pytest.raises(ValueError):
        Circuit(1, ())
    with pytest.raises(ValueError):
        Circuit(1, ((0,),))  # self loop
    with pytest.raises(ValueError):
        Circuit(1, ((),))
    with pytest.raises(ValueError):
        gen_circuit(0, 1, seed=0)


def test_evaluate_and_brute_force():
    identity = Circuit(1, ((1,), (2,)))  # NOR(NOR(x1)) = x1
    assert [identity.evaluate([b]) for b in (0, 1)] == [0, 1]
    assert brute_force_sat(identity)
    contradiction = Circuit(1, ((1, 2), (2,)))  # NOR(NOT x1, x1)
    assert not brute_force_sat(contradiction)


def test_brute_force_input_limit():
    c = Circuit(MAX_BRUTE_FORCE_INPUTS + 1, ((1,),))
    with pytest.raises(ResourceError):
        brute_force_sat(c)


def test_unsatisfiable_circuit_has_no_repair():
    inst, cs = encode_circuit(Circuit(1, ((1, 2), (2,))))
    answer, sample, _ = repair_exists(inst, cs)
    assert answer is False
    assert len(sample) == 0


def test_repair_is_a_satisfying_assignment():
    c = gen_circuit(3, 2, seed=1)
    inst, cs = encode_circuit(c)
    answer, sample, _ = repair_exists(inst, cs, small_sample=False)
    assert answer == brute_force_sat(c)
    if not answer:
        return
    repaired = apply_update_set(inst, sample)
    assert check(repaired, cs).consistent
    values = [repaired.value(x) for x in repaired.measure_cells()]
    assert set(values) <= {0, 1}
    bits = [r[1] for r in repaired.rows("input")]
    assert c.evaluate(bits) == 1
    for _, nor, or_ in repaired.rows("gate"):
        assert nor + or_ == 1


@settings(max_examples=15, deadline=None)
@given(gates=st.integers(1, 3), inputs=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_repair_exists_iff_satisfiable(gates, inputs, seed):
    c = gen_circuit(gates, inputs, seed)
    inst, cs = encode_circuit(c)
    answer, sample, _ = repair_exists(inst, cs, small_sample=False)
    assert answer == brute_force_sat(c)
    if answer:
        repaired = apply_update_set(inst, sample)
        assert check(repaired, cs).consistent
        assert c.evaluate([r[1] for r in repaired.rows("input")]) == 1
