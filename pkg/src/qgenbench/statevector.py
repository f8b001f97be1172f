"""Dense state-vector simulator.

Basis index convention: qubit 0 is the most-significant bit, so the index of
``|q0 q1 ... q_{n-1}>`` is ``sum(q_k << (n - 1 - k))``.

Amplitude arrays may carry leading batch axes, i.e. shape ``(..., 2**n)``.
The gate kernels update them in place through an ``(..., 2, 2, ..., 2)`` view
and accept either a scalar angle or one angle per batch row.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

GATE_KINDS = ("H", "CNOT", "RX", "RY", "RZ", "RZZ")
PARAMETRIC = frozenset({"RX", "RY", "RZ", "RZZ"})
TWO_QUBIT = frozenset({"CNOT", "RZZ"})

_SQRT1_2 = 1.0 / np.sqrt(2.0)


class AngleSource(str, Enum):
    FIXED = "fixed"
    PARAM = "param"
    NOISE = "noise"


@dataclass(frozen=True)
class GateOp:
    """One gate of a circuit.

    ``source`` says where the rotation angle comes from: a fixed value in
    ``angle`` (radians), or the parameter/noise vector entry ``slot``.
    """

    kind: str
    targets: tuple[int, ...]
    source: AngleSource | None = None
    slot: int = -1
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind in TWO_QUBIT else 1
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {self.targets}")
        if len(set(self.targets)) != arity or min(self.targets) < 0:
            raise ValueError(f"invalid targets {self.targets}")
        if self.kind in PARAMETRIC:
            if self.source is None:
                raise ValueError(f"{self.kind} needs an angle source")
            if self.source is not AngleSource.FIXED and self.slot < 0:
                raise ValueError(f"{self.kind} needs a slot index")
        elif self.source is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def parametric(self) -> bool:
        return self.kind in PARAMETRIC

    def resolve(self, params=None, noise=None):
        """Angle for this gate; a scalar or, for batched vectors, an array."""
        if self.source is None:
            return None
        if self.source is AngleSource.FIXED:
            return self.angle
        vec = params if self.source is AngleSource.PARAM else noise
        if vec is None:
            raise ValueError(f"gate needs a {self.source.value} vector")
        return np.asarray(vec)[..., self.slot]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "targets": list(self.targets)}
        if self.source is not None:
            out["source"] = self.source.value
            if self.source is AngleSource.FIXED:
                out["angle"] = self.angle
            else:
                out["slot"] = self.slot
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GateOp":
        source = data.get("source")
        return cls(
            kind=data["kind"],
            targets=tuple(data["targets"]),
            source=AngleSource(source) if source is not None else None,
            slot=int(data.get("slot", -1)),
            angle=float(data.get("angle", 0.0)),
        )


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape[-1] != 2**self.n_qubits:
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got {self.amplitudes.shape[-1]}"
            )

    @classmethod
    def zero(cls, n_qubits: int, batch: int | None = None) -> "StateVector":
        shape = (2**n_qubits,) if batch is None else (batch, 2**n_qubits)
        amps = np.zeros(shape, dtype=np.complex128)
        amps[..., 0] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm_sq(self):
        return np.sum(np.abs(self.amplitudes) ** 2, axis=-1)


def _index(n: int, fixed: dict[int, int]):
    idx = [slice(None)] * n
    for q, bit in fixed.items():
        idx[q] = bit
    return (Ellipsis, *idx)


def _bcast(value, remaining_axes: int):
    # scalar stays scalar; a per-row array gets singleton axes for the qubit dims
    value = np.asarray(value)
    if value.ndim == 0:
        return value[()]
    return value.reshape(value.shape + (1,) * remaining_axes)


def apply_to_tensor(tensor: np.ndarray, n: int, kind: str, targets, angle=None) -> None:
    """Apply one gate in place to a ``(..., 2, ..., 2)`` amplitude tensor."""
    if kind in TWO_QUBIT:
        a, b = targets
        i00 = _index(n, {a: 0, b: 0})
        i01 = _index(n, {a: 0, b: 1})
        i10 = _index(n, {a: 1, b: 0})
        i11 = _index(n, {a: 1, b: 1})
        if kind == "CNOT":
            tmp = tensor[i10].copy()
            tensor[i10] = tensor[i11]
            tensor[i11] = tmp
            return
        half = _bcast(angle, n - 2) / 2.0
        even = np.exp(-1j * half)
        odd = np.exp(1j * half)
        tensor[i00] *= even
        tensor[i11] *= even
        tensor[i01] *= odd
        tensor[i10] *= odd
        return

    (q,) = targets
    i0 = _index(n, {q: 0})
    i1 = _index(n, {q: 1})
    if kind == "RZ":
        half = _bcast(angle, n - 1) / 2.0
        tensor[i0] *= np.exp(-1j * half)
        tensor[i1] *= np.exp(1j * half)
        return
    a0 = tensor[i0].copy()
    a1 = tensor[i1]
    if kind == "H":
        tensor[i0] = (a0 + a1) * _SQRT1_2
        tensor[i1] = (a0 - a1) * _SQRT1_2
        return
    half = _bcast(angle, n - 1) / 2.0
    c, s = np.cos(half), np.sin(half)
    if kind == "RX":
        tensor[i0] = c * a0 - 1j * s * a1
        tensor[i1] = -1j * s * a0 + c * a1
    elif kind == "RY":
        tensor[i0] = c * a0 - s * a1
        tensor[i1] = s * a0 + c * a1
    else:
        raise ValueError(f"unknown gate kind {kind!r}")


def _as_tensor(state: StateVector) -> np.ndarray:
    amps = state.amplitudes
    return amps.reshape(amps.shape[:-1] + (2,) * state.n_qubits)


def apply_gate(state: StateVector, gate: GateOp, resolved_angle=None) -> StateVector:
    """Apply ``gate`` to ``state`` in place and return the state."""
    n = state.n_qubits
    if max(gate.targets) >= n:
        raise ValueError(f"gate targets {gate.targets} out of range for {n} qubits")
    if gate.parametric and resolved_angle is None:
        raise ValueError(f"{gate.kind} gate needs a resolved angle")
    if not state.amplitudes.flags.c_contiguous:
        state.amplitudes = np.ascontiguousarray(state.amplitudes)
    apply_to_tensor(_as_tensor(state), n, gate.kind, gate.targets, resolved_angle)
    return state


def run_gates(n_qubits: int, gates, params=None, noise=None, batch: int | None = None) -> StateVector:
    """Evolve ``|0...0>`` through ``gates``, resolving angles from params/noise."""
    state = StateVector.zero(n_qubits, batch)
    tensor = _as_tensor(state)
    for gate in gates:
        if max(gate.targets) >= n_qubits:
            raise ValueError(f"gate targets {gate.targets} out of range for {n_qubits} qubits")
        apply_to_tensor(tensor, n_qubits, gate.kind, gate.targets, gate.resolve(params, noise))
    return state


def probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_from_probs(probs: np.ndarray, rng, shots: int) -> np.ndarray:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, _rng(rng).random(shots), side="right")
    return np.minimum(idx, len(probs) - 1)


def sample_basis(state: StateVector, rng_seed, shots: int) -> np.ndarray:
    """Draw ``shots`` basis indices i.i.d. from the state's distribution."""
    return sample_from_probs(probabilities(state), rng_seed, shots)


def expect_z(state: StateVector, qubit: int):
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    p = probabilities(state).reshape(state.amplitudes.shape[:-1] + (2**qubit, 2, 2 ** (n - qubit - 1)))
    return p[..., 0, :].sum(axis=(-2, -1)) - p[..., 1, :].sum(axis=(-2, -1))


def expect_z_all(state: StateVector) -> np.ndarray:
    """<Z_k> for every qubit; shape ``(..., n)``."""
    n = state.n_qubits
    p = probabilities(state)
    signs = 1.0 - 2.0 * ((np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
    return p @ signs


def marginal_register_probs(state: StateVector, qubit_range) -> np.ndarray:
    """Distribution of measuring only the contiguous qubits in ``qubit_range``."""
    qubits = list(qubit_range)
    n = state.n_qubits
    if not qubits:
        raise ValueError("empty qubit range")
    start, stop = qubits[0], qubits[-1] + 1
    if qubits != list(range(start, stop)) or start < 0 or stop > n:
        raise ValueError(f"invalid contiguous range {qubit_range} for {n} qubits")
    p = probabilities(state)
    p = p.reshape(p.shape[:-1] + (2**start, 2 ** (stop - start), 2 ** (n - stop)))
    return p.sum(axis=(-3, -1))
