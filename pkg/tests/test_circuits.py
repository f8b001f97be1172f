import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgenbench import circuits
from qgenbench.circuits import Kind
from qgenbench.statevector import TWO_QUBIT, AngleSource, marginal_register_probs

from oracles import dense_run


def counts(template, block=0):
    gates = [g for g, b in zip(template.gates, template.gate_blocks) if b == block]
    return {
        "total": len(gates),
        "param": sum(g.source is AngleSource.PARAM for g in gates),
        "noise": sum(g.source is AngleSource.NOISE for g in gates),
        "two": sum(g.kind in TWO_QUBIT for g in gates),
    }


def test_continuous_counts():
    t = circuits.build_continuous(2, 2)
    assert len(t.gates) == 20 and t.n_params == 12
    t = circuits.build_continuous(3, 1)
    assert len(t.gates) == 15 and t.n_params == 9 and t.n_noise_slots == 3
    c = counts(t)
    assert c == {"total": 15, "param": 9, "noise": 3, "two": 3}


def test_discrete_counts():
    assert circuits.build_discrete_standard(2, 4, 1).n_params == 22
    assert circuits.build_discrete_standard(3, 4, 1).n_params == 34
    t = circuits.build_discrete_copula(2, 4, 1)
    assert t.n_params == 36 and sum(b < 0 for b in t.gate_blocks) == 8
    t = circuits.build_discrete_copula(3, 4, 1)
    assert t.n_params == 54 and sum(b < 0 for b in t.gate_blocks) == 12


@pytest.mark.parametrize("d", [1, 2, 3, 4])
@pytest.mark.parametrize("r", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("nb", [1, 2, 3])
def test_counts_follow_resource_formulas(d, r, nb):
    cont = circuits.build_continuous(d, nb)
    assert cont.n_qubits == d and cont.n_params == 3 * d * nb
    assert all(counts(cont, b)["noise"] == d for b in range(nb))
    if r * d >= 3:
        std = circuits.build_discrete_standard(d, r, nb)
        assert std.n_qubits == r * d and std.n_params == (3 * r * d - 2) * nb
    if d >= 2:
        cop = circuits.build_discrete_copula(d, r, nb)
        assert cop.n_qubits == r * d
        assert cop.n_params == nb * r * d * (r + 5) // 2
        assert sum(b < 0 for b in cop.gate_blocks) == r * d


@pytest.mark.parametrize("kind,d,r", [("continuous", 3, 1), ("standard", 2, 3), ("copula", 3, 2)])
def test_param_slots_used_once(kind, d, r):
    t = circuits.build(kind, d, r, 2)
    slots = sorted(g.slot for g in t.gates if g.source is AngleSource.PARAM)
    assert slots == list(range(t.n_params))


def test_copula_no_cross_register_gates_after_init():
    t = circuits.build_discrete_copula(3, 4, 2)
    for g, b in zip(t.gates, t.gate_blocks):
        if b >= 0 and len(g.targets) == 2:
            assert t.register_of(g.targets[0]) == t.register_of(g.targets[1])


def test_builder_errors():
    with pytest.raises(ValueError):
        circuits.build_continuous(0, 1)
    with pytest.raises(ValueError):
        circuits.build_discrete_standard(1, 2, 1)
    with pytest.raises(ValueError):
        circuits.build_discrete_copula(1, 4, 1)
    with pytest.raises(ValueError):
        circuits.build_discrete_copula(2, 1, 1)


def test_continuous_trivial_points():
    t = circuits.build_continuous(2, 1)
    theta = np.zeros(t.n_params)
    np.testing.assert_allclose(circuits.run_continuous(t, theta, np.zeros(2)), [1, 1], atol=1e-12)
    # RX(pi) on both qubits gives |11>; CNOT(0->1) then CNOT(1->0) leaves |10>
    np.testing.assert_allclose(circuits.run_continuous(t, theta, np.full(2, np.pi)), [0, 1], atol=1e-12)
    z = np.array([0.3, -1.2])
    a = circuits.run_continuous(t, np.linspace(0, 1, 6), z)
    b = circuits.run_continuous(t, np.linspace(0, 1, 6), z)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        circuits.run_continuous(t, theta, np.array([4.0, 0.0]))


def test_run_discrete_trivial_points():
    std = circuits.build_discrete_standard(2, 4, 1)
    pts = circuits.run_discrete(std, np.zeros(std.n_params), 0, 1000)
    assert np.all(pts < 1 / 16)
    cop = circuits.build_discrete_copula(2, 4, 1)
    pts = circuits.run_discrete(cop, np.zeros(cop.n_params), 0, 1000)
    assert np.array_equal(np.floor(16 * pts[:, 0]), np.floor(16 * pts[:, 1]))
    assert np.array_equal(circuits.run_discrete(cop, np.ones(36), 4, 50), circuits.run_discrete(cop, np.ones(36), 4, 50))
    with pytest.raises(ValueError):
        circuits.run_discrete(circuits.build_continuous(2, 1), np.zeros(6), 0, 5)


def test_run_discrete_matches_exact_distribution():
    t = circuits.build_discrete_copula(2, 4, 1)
    theta = np.random.default_rng(2).uniform(-np.pi, np.pi, t.n_params)
    p = circuits.model_probabilities(t, theta)
    n = 100_000
    pts = circuits.run_discrete(t, theta, 9, n)
    cells = np.floor(16 * pts).astype(int)
    freq = np.bincount(cells[:, 0] * 16 + cells[:, 1], minlength=256) / n
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / n) + 1e-12)


@pytest.mark.parametrize("kind,d,r", [("copula", 2, 4), ("copula", 3, 3), ("standard", 2, 4)])
def test_append_block_preserves_distribution(kind, d, r):
    t = circuits.build(kind, d, r, 1)
    theta = np.random.default_rng(0).normal(size=t.n_params)
    t2, theta2 = circuits.append_block(t, theta)
    assert t2.n_blocks == 2 and t2.n_params == 2 * t.n_params
    np.testing.assert_allclose(circuits.model_probabilities(t2, theta2), circuits.model_probabilities(t, theta), atol=1e-12)


def test_append_block_continuous_is_not_identity():
    # the appended block re-uploads noise and applies its CNOT ring, so even
    # zero parameters change the output unless the state is a ring fixed point
    t = circuits.build_continuous(2, 1)
    zero = np.zeros(2)
    t2, theta2 = circuits.append_block(t, np.zeros(t.n_params))
    np.testing.assert_allclose(circuits.run_continuous(t2, theta2, zero), [1, 1], atol=1e-12)
    theta = np.random.default_rng(0).normal(size=t.n_params)
    t2, theta2 = circuits.append_block(t, theta)
    for z in (zero, np.array([0.7, -0.4])):
        assert not np.allclose(circuits.run_continuous(t2, theta2, z), circuits.run_continuous(t, theta, z))


@settings(max_examples=20, deadline=None)
@given(kind=st.sampled_from(["standard", "copula", "continuous"]), seed=st.integers(0, 10**6))
def test_simulate_matches_dense_oracle(kind, seed):
    rng = np.random.default_rng(seed)
    t = circuits.build(kind, 2, 2, 2)
    theta = rng.uniform(-np.pi, np.pi, t.n_params)
    noise = rng.uniform(-np.pi, np.pi, t.n_noise_slots) if t.n_noise_slots else None
    np.testing.assert_allclose(circuits.simulate(t, theta, noise).amplitudes, dense_run(t.n_qubits, t.gates, theta, noise), atol=1e-12)


@pytest.mark.parametrize("d,r,nb", [(2, 4, 1), (3, 4, 2), (2, 3, 3)])
def test_copula_fast_path_matches_gatewise(d, r, nb):
    t = circuits.build_discrete_copula(d, r, nb)
    theta = np.random.default_rng(d + r).normal(size=(3, t.n_params))
    fast = circuits.simulate(t, theta).amplitudes
    slow = circuits.simulate_gatewise(t, theta).amplitudes
    np.testing.assert_allclose(fast, slow, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("nb", [1, 2])
def test_copula_marginals_uniform(d, nb):
    t = circuits.build_discrete_copula(d, 4, nb)
    rng = np.random.default_rng(10 * d + nb)
    for _ in range(10):
        state = circuits.simulate(t, rng.uniform(-np.pi, np.pi, t.n_params))
        for m in range(d):
            np.testing.assert_allclose(marginal_register_probs(state, range(4 * m, 4 * m + 4)), 1 / 16, atol=1e-10)


def test_template_json_roundtrip():
    for t in [circuits.build("copula", 2, 3, 2), circuits.build("continuous", 3, 4, 1)]:
        back = circuits.CircuitTemplate.from_dict(json.loads(t.to_json()))
        assert back == t


def test_check_params_length():
    t = circuits.build("standard", 2, 2, 1)
    with pytest.raises(ValueError):
        circuits.simulate(t, np.zeros(t.n_params + 1))


def test_split_registers():
    assert circuits.split_registers(np.array([0b0111_0010]), 2, 4).tolist() == [[7, 2]]


def test_generic_template_kind():
    t = circuits.from_gates(1, [circuits.GateOp("RX", (0,), AngleSource.PARAM, 0)])
    assert t.kind is Kind.GENERIC and t.n_params == 1
