"""Circuit ansatzes: continuous (re-uploading), discrete standard, discrete copula.

Parameter slots are numbered block-major, so appending a block only appends
slots and a zero-padded parameter vector reproduces the shallower circuit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .statevector import (
    AngleSource,
    GateOp,
    apply_to_tensor,
    StateVector,
    expect_z_all,
    probabilities,
    run_gates,
    sample_from_probs,
    _rng,
)

P = AngleSource.PARAM


class Kind(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE_STANDARD = "standard"
    DISCRETE_COPULA = "copula"
    GENERIC = "generic"

    @property
    def discrete(self) -> bool:
        return self is not Kind.CONTINUOUS


@dataclass(frozen=True)
class CircuitTemplate:
    kind: Kind
    d: int
    r: int
    n_blocks: int
    n_qubits: int
    gates: tuple[GateOp, ...]
    n_params: int
    n_noise_slots: int = 0
    # block index of each gate, -1 for the one-off initialisation stage
    gate_blocks: tuple[int, ...] = ()

    def register_of(self, qubit: int) -> int:
        return qubit if self.kind is Kind.CONTINUOUS else qubit // self.r

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "d": self.d,
            "r": self.r,
            "n_blocks": self.n_blocks,
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "n_noise_slots": self.n_noise_slots,
            "gates": [dict(g.to_dict(), block=b) for g, b in zip(self.gates, self.gate_blocks)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitTemplate":
        gates = tuple(GateOp.from_dict(g) for g in data["gates"])
        return cls(
            kind=Kind(data["kind"]),
            d=data["d"],
            r=data["r"],
            n_blocks=data["n_blocks"],
            n_qubits=data["n_qubits"],
            gates=gates,
            n_params=data["n_params"],
            n_noise_slots=data.get("n_noise_slots", 0),
            gate_blocks=tuple(g.get("block", 0) for g in data["gates"]),
        )


class _Builder:
    def __init__(self):
        self.gates: list[GateOp] = []
        self.blocks: list[int] = []
        self.n_params = 0
        self.block = -1

    def add(self, kind, *targets, noise_slot=None):
        if kind in ("H", "CNOT"):
            gate = GateOp(kind, targets)
        elif noise_slot is not None:
            gate = GateOp(kind, targets, AngleSource.NOISE, noise_slot)
        else:
            gate = GateOp(kind, targets, P, self.n_params)
            self.n_params += 1
        self.gates.append(gate)
        self.blocks.append(self.block)


def build_continuous(d: int, n_blocks: int) -> CircuitTemplate:
    """Re-uploading circuit: per block RX(z) layer, CNOT ring, RY/RZ/RY layers."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    b = _Builder()
    for block in range(n_blocks):
        b.block = block
        for q in range(d):
            b.add("RX", q, noise_slot=q)
        if d > 1:
            for q in range(d):
                b.add("CNOT", q, (q + 1) % d)
        for kind in ("RY", "RZ", "RY"):
            for q in range(d):
                b.add(kind, q)
    return CircuitTemplate(Kind.CONTINUOUS, d, 1, n_blocks, d, tuple(b.gates), b.n_params, d, tuple(b.blocks))


def build_discrete_standard(d: int, r: int, n_blocks: int) -> CircuitTemplate:
    """Per block: RY on all qubits, nearest-neighbour RZZ chain, RY on all but the last qubit."""
    if d < 1 or r < 2:
        raise ValueError("need d >= 1 and r >= 2")
    if r * d < 3:
        raise ValueError("discrete standard circuit needs at least 3 qubits")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    n = r * d
    b = _Builder()
    for block in range(n_blocks):
        b.block = block
        for q in range(n):
            b.add("RY", q)
        for q in range(n - 1):
            b.add("RZZ", q, q + 1)
        for q in range(n - 1):
            b.add("RY", q)
    return CircuitTemplate(Kind.DISCRETE_STANDARD, d, r, n_blocks, n, tuple(b.gates), b.n_params, 0, tuple(b.blocks))


def build_discrete_copula(d: int, r: int, n_blocks: int) -> CircuitTemplate:
    """Register ladder ``sum_i |i>...|i>`` followed by register-local blocks.

    Each block applies, per register: RZ layer, RY layer, RZZ on every
    intra-register pair, RY layer. No gate crosses registers after the
    initialisation, so every register marginal stays uniform.
    """
    if d < 2 or r < 2:
        raise ValueError("copula circuit needs d >= 2 and r >= 2")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    n = r * d
    b = _Builder()
    for j in range(r):
        b.add("H", j)
    for j in range(r):
        for m in range(1, d):
            b.add("CNOT", j, m * r + j)
    for block in range(n_blocks):
        b.block = block
        for m in range(d):
            qs = range(m * r, (m + 1) * r)
            for q in qs:
                b.add("RZ", q)
            for q in qs:
                b.add("RY", q)
            for i, qi in enumerate(qs):
                for qj in list(qs)[i + 1:]:
                    b.add("RZZ", qi, qj)
            for q in qs:
                b.add("RY", q)
    return CircuitTemplate(Kind.DISCRETE_COPULA, d, r, n_blocks, n, tuple(b.gates), b.n_params, 0, tuple(b.blocks))


def build(kind: Kind | str, d: int, r: int = 4, n_blocks: int = 1) -> CircuitTemplate:
    kind = Kind(kind)
    if kind is Kind.CONTINUOUS:
        return build_continuous(d, n_blocks)
    if kind is Kind.DISCRETE_STANDARD:
        return build_discrete_standard(d, r, n_blocks)
    if kind is Kind.DISCRETE_COPULA:
        return build_discrete_copula(d, r, n_blocks)
    raise ValueError(f"cannot build kind {kind}")


def from_gates(n_qubits: int, gates) -> CircuitTemplate:
    """Wrap an arbitrary gate list (read out as a single n-qubit register)."""
    gates = tuple(gates)
    slots = [g.slot for g in gates if g.source is P]
    noise = [g.slot for g in gates if g.source is AngleSource.NOISE]
    n_params = max(slots, default=-1) + 1
    return CircuitTemplate(
        Kind.GENERIC, 1, n_qubits, 1, n_qubits, gates, n_params,
        max(noise, default=-1) + 1, (0,) * len(gates),
    )


def append_block(template: CircuitTemplate, params) -> tuple[CircuitTemplate, np.ndarray]:
    """One more block, its parameters initialised to zero (identity rotations)."""
    params = _check_params(template, params)
    bigger = build(template.kind, template.d, template.r, template.n_blocks + 1)
    return bigger, np.concatenate([params, np.zeros(bigger.n_params - template.n_params)])


def _check_params(template: CircuitTemplate, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape[-1] != template.n_params:
        raise ValueError(f"expected {template.n_params} parameters, got {params.shape[-1]}")
    return params


def simulate(template: CircuitTemplate, params, noise=None) -> StateVector:
    """Final state; ``params``/``noise`` may carry one leading batch axis."""
    params = _check_params(template, params)
    batch = None
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape[-1] != template.n_noise_slots:
            raise ValueError(f"expected {template.n_noise_slots} noise values, got {noise.shape[-1]}")
        if noise.ndim == 2:
            batch = noise.shape[0]
    elif template.n_noise_slots:
        raise ValueError("this circuit needs a noise vector")
    if params.ndim == 2:
        if batch is not None and params.shape[0] != batch:
            raise ValueError("params and noise batch sizes differ")
        batch = params.shape[0]
    if template.kind is Kind.DISCRETE_COPULA:
        return StateVector(template.n_qubits, copula_amplitudes(template, params))
    return run_gates(template.n_qubits, template.gates, params, noise, batch)


def model_probabilities(template: CircuitTemplate, params) -> np.ndarray:
    if not template.kind.discrete:
        raise ValueError("continuous circuits have no discrete output distribution")
    return probabilities(simulate(template, params))


def split_registers(indices, d: int, r: int) -> np.ndarray:
    """Basis indices -> per-register integers, register 0 first."""
    indices = np.asarray(indices)
    shifts = r * (d - 1 - np.arange(d))
    return (indices[..., None] >> shifts) & ((1 << r) - 1)


def run_discrete(template: CircuitTemplate, params, rng_seed, n_samples: int) -> np.ndarray:
    """``n_samples`` points in [0,1]^d: sampled grid cell plus uniform jitter."""
    if not template.kind.discrete:
        raise ValueError("run_discrete needs a discrete circuit")
    rng = _rng(rng_seed)
    idx = sample_from_probs(model_probabilities(template, params), rng, n_samples)
    cells = split_registers(idx, template.d, template.r)
    return (cells + rng.random(cells.shape)) / 2**template.r


def continuous_outputs(template: CircuitTemplate, params, noise) -> np.ndarray:
    """``(<Z_k> + 1) / 2`` for every qubit; batched over noise rows."""
    if template.kind is not Kind.CONTINUOUS:
        raise ValueError("continuous_outputs needs a continuous circuit")
    return (expect_z_all(simulate(template, params, noise)) + 1.0) / 2.0


def run_continuous(template: CircuitTemplate, params, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 1:
        raise ValueError("run_continuous takes a single noise vector")
    if np.any(np.abs(noise) > np.pi):
        raise ValueError("noise values must lie in [-pi, pi]")
    return continuous_outputs(template, params, noise)


def draw_noise(template: CircuitTemplate, rng, n: int) -> np.ndarray:
    return _rng(rng).uniform(-np.pi, np.pi, size=(n, template.n_noise_slots))


def sample_continuous(template: CircuitTemplate, params, rng_seed, n_samples: int) -> np.ndarray:
    return continuous_outputs(template, params, draw_noise(template, rng_seed, n_samples))


def sample(template: CircuitTemplate, params, rng_seed, n_samples: int) -> np.ndarray:
    if template.kind is Kind.CONTINUOUS:
        return sample_continuous(template, params, rng_seed, n_samples)
    return run_discrete(template, params, rng_seed, n_samples)


# -- copula fast path ---------------------------------------------------------
#
# After the ladder the state is 2^{-r/2} sum_i U_0|i> (x) ... (x) U_{d-1}|i>,
# so amplitudes are a d-way contraction of the register unitaries. Each U_m is
# obtained by simulating the register's own gates on all 2^r basis inputs.

def register_unitaries(template: CircuitTemplate, params) -> list[np.ndarray]:
    r, d = template.r, template.d
    params = np.asarray(params, dtype=float)
    batch = params.shape[:-1]
    per_reg = [[] for _ in range(d)]
    for gate, block in zip(template.gates, template.gate_blocks):
        if block >= 0:
            per_reg[gate.targets[0] // r].append(gate)
    mats = []
    for m, gates in enumerate(per_reg):
        cols = np.zeros(batch + (2**r, 2**r), dtype=np.complex128)
        cols[..., np.arange(2**r), np.arange(2**r)] = 1.0
        tensor = cols.reshape(batch + (2**r,) + (2,) * r)
        for gate in gates:
            local = tuple(q - m * r for q in gate.targets)
            angle = gate.resolve(params)
            if np.ndim(angle):
                angle = np.asarray(angle)[..., None]
            apply_to_tensor(tensor, r, gate.kind, local, angle)
        # row a of cols is U|a>, so U = cols^T
        mats.append(np.swapaxes(cols, -1, -2))
    return mats


def copula_amplitudes(template: CircuitTemplate, params) -> np.ndarray:
    mats = register_unitaries(template, params)
    letters = "abcdefghij"[: template.d]
    spec = ",".join(f"...{c}z" for c in letters) + "->..." + letters
    amps = np.einsum(spec, *mats) / np.sqrt(2.0**template.r)
    return amps.reshape(amps.shape[: -template.d] + (-1,))


def simulate_gatewise(template: CircuitTemplate, params, noise=None) -> StateVector:
    """Gate-by-gate simulation, no structural shortcuts (reference path)."""
    params = _check_params(template, params)
    batch = params.shape[0] if params.ndim == 2 else None
    if noise is not None and np.ndim(noise) == 2:
        batch = np.shape(noise)[0]
    return run_gates(template.n_qubits, template.gates, params, noise, batch)
