"""Grid histograms on [0,1]^d and the KL divergence used for all evaluation."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .circuits import model_probabilities

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class Histogram:
    dim: int
    bins_per_dim: int
    probs: np.ndarray
    n_source_points: int = 0

    @property
    def n_cells(self) -> int:
        return self.probs.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"i{k + 1}" for k in range(self.dim)] + ["prob"])
            cells = np.indices((self.bins_per_dim,) * self.dim).reshape(self.dim, -1).T
            for cell, p in zip(cells, self.probs):
                writer.writerow([*cell.tolist(), repr(float(p))])


def cell_indices(samples, r: int) -> np.ndarray:
    """Flat grid-cell index of each sample, dimension 0 most significant."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise ValueError("histogram samples must lie in [0, 1]")
    bins = 2**r
    cells = np.minimum(np.floor(bins * x).astype(np.int64), bins - 1)
    flat = np.zeros(len(x), dtype=np.int64)
    for j in range(x.shape[1]):
        flat = flat * bins + cells[:, j]
    return flat


def histogram(samples, r: int) -> Histogram:
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    dim = x.shape[1]
    counts = np.bincount(cell_indices(x, r), minlength=2 ** (r * dim)).astype(float)
    return Histogram(dim, 2**r, counts / len(x), len(x))


def exact_model_histogram(template, params) -> Histogram:
    """Model distribution read straight off the state (no sampling noise)."""
    if not template.kind.discrete:
        raise ValueError("continuous circuits need a sampled histogram")
    probs = model_probabilities(template, params)
    return Histogram(template.d, 2**template.r, probs, 0)


def kl_divergence(q, p, epsilon: float = DEFAULT_EPSILON) -> float:
    """``sum_i Q_i ln(Q_i / P~_i)`` with ``P~ = (P + eps) / (1 + eps * n_cells)``.

    Smoothing is applied to the model side only. With ``epsilon == 0`` and a
    cell where Q > 0 = P the result is ``inf``.
    """
    qp = getattr(q, "probs", q)
    pp = getattr(p, "probs", p)
    qp, pp = np.asarray(qp, dtype=float), np.asarray(pp, dtype=float)
    if qp.shape != pp.shape:
        raise ValueError(f"histogram shapes differ: {qp.shape} vs {pp.shape}")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon:
        pp = (pp + epsilon) / (1.0 + epsilon * pp.size)
    support = qp > 0
    qs, ps = qp[support], pp[support]
    if np.any(ps <= 0):
        return float("inf")
    return float(np.sum(qs * np.log(qs / ps)))
