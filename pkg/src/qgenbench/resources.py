"""Closed-form resource estimates per generated sample, and audits of built circuits.

Runtime is measured in abstract depth time-steps, not wall-clock time.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .circuits import CircuitTemplate, Kind
from .statevector import TWO_QUBIT

RUNTIME_UNIT = "depth time-steps"


@dataclass(frozen=True)
class ResourceEstimate:
    kind: str
    d: int
    r: int
    n_blocks: int
    n_shots: int
    qubits: int
    init_gates: int
    init_depth: int
    gates_per_block: int
    depth_per_block: int
    runtime_per_sample: int

    def to_dict(self) -> dict:
        return asdict(self)


def estimate(kind, d: int, r: int = 4, n_blocks: int = 1, n_shots: int = 1) -> ResourceEstimate:
    kind = Kind(kind)
    if d < 1:
        raise ValueError("d must be >= 1")
    if n_blocks < 1 or n_shots < 1:
        raise ValueError("n_blocks and n_shots must be >= 1")
    if kind is Kind.CONTINUOUS:
        return ResourceEstimate(kind.value, d, r, n_blocks, n_shots, d, 0, 0, 5 * d, d + 4,
                                n_shots * n_blocks * (d + 4))
    if r < 2:
        raise ValueError("r must be >= 2 for discrete circuits")
    if kind is Kind.DISCRETE_STANDARD:
        return ResourceEstimate(kind.value, d, r, n_blocks, n_shots, r * d, 0, 0, 3 * r * d - 2,
                                r * d + 2, n_blocks * (r * d + 2))
    if kind is Kind.DISCRETE_COPULA:
        init_depth = r * (d - 1) + 1
        block_depth = r * (r - 1) // 2 + 3
        return ResourceEstimate(kind.value, d, r, n_blocks, n_shots, r * d, r * d, init_depth,
                                r * d * (r + 5) // 2, block_depth, init_depth + n_blocks * block_depth)
    raise ValueError(f"no resource model for {kind.value!r} circuits")


def runtime_crossover_r(n_shots: int, n_blocks_cont: int, n_blocks_disc: int) -> int:
    """Smallest r at which the standard circuit's runtime slope in d reaches the continuous one."""
    return max(1, -(-n_shots * n_blocks_cont // n_blocks_disc))


def sequential_depth(template: CircuitTemplate, gate_indices) -> int:
    """Depth of a gate subsequence.

    Single-qubit gates are scheduled as early as their qubit allows. A
    two-qubit gate occupies every qubit of the registers it touches, so
    entangling gates within a register run one per time step while
    independent registers proceed in parallel.
    """
    free = [0] * template.n_qubits
    register_qubits: dict[int, list[int]] = {}
    for q in range(template.n_qubits):
        register_qubits.setdefault(template.register_of(q), []).append(q)
    for i in gate_indices:
        gate = template.gates[i]
        if gate.kind in TWO_QUBIT:
            qubits = sorted({q for t in gate.targets for q in register_qubits[template.register_of(t)]})
        else:
            qubits = list(gate.targets)
        t = max(free[q] for q in qubits) + 1
        for q in qubits:
            free[q] = t
    return max(free, default=0)


@dataclass
class AuditReport:
    kind: str
    expected: dict
    actual: dict
    deviations: list = field(default_factory=list)

    @property
    def gates_match(self) -> bool:
        return not any(dev.startswith("gates") or dev.startswith("init_gates") for dev in self.deviations)

    @property
    def ok(self) -> bool:
        return not self.deviations

    def to_dict(self) -> dict:
        return {"kind": self.kind, "expected": self.expected, "actual": self.actual,
                "deviations": self.deviations, "ok": self.ok}


def audit_circuit(template: CircuitTemplate, depth_tolerance: int = 1) -> AuditReport:
    """Compare a built template with the closed-form estimate; report-only."""
    est = estimate(template.kind, template.d, template.r, template.n_blocks)
    blocks = template.gate_blocks
    init = [i for i, b in enumerate(blocks) if b < 0]
    actual = {
        "qubits": template.n_qubits,
        "init_gates": len(init),
        "init_depth": sequential_depth(template, init),
        "n_params": template.n_params,
        "gates_per_block": [],
        "depth_per_block": [],
    }
    for b in range(template.n_blocks):
        idx = [i for i, blk in enumerate(blocks) if blk == b]
        actual["gates_per_block"].append(len(idx))
        actual["depth_per_block"].append(sequential_depth(template, idx))
    expected = {k: v for k, v in est.to_dict().items()
                if k in ("qubits", "init_gates", "init_depth", "gates_per_block", "depth_per_block")}
    report = AuditReport(template.kind.value, expected, actual)
    for key in ("qubits", "init_gates"):
        if actual[key] != expected[key]:
            report.deviations.append(f"{key}: built {actual[key]}, formula {expected[key]}")
    if abs(actual["init_depth"] - expected["init_depth"]) > depth_tolerance:
        report.deviations.append(f"init_depth: built {actual['init_depth']}, formula {expected['init_depth']}")
    for b, (g, dep) in enumerate(zip(actual["gates_per_block"], actual["depth_per_block"])):
        if g != expected["gates_per_block"]:
            report.deviations.append(f"gates in block {b}: built {g}, formula {expected['gates_per_block']}")
        if abs(dep - expected["depth_per_block"]) > depth_tolerance:
            report.deviations.append(f"depth of block {b}: built {dep}, formula {expected['depth_per_block']}")
    return report


def estimate_grid(kinds, ds, rs, n_blocks, n_shots) -> list[ResourceEstimate]:
    out = []
    for kind in kinds:
        for d in ds:
            for nb in n_blocks:
                if Kind(kind) is Kind.CONTINUOUS:
                    out.extend(estimate(kind, d, 1, nb, ns) for ns in n_shots)
                else:
                    out.extend(estimate(kind, d, r, nb, 1) for r in rs)
    return out
