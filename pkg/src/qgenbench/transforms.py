"""Min-max normalisation and the empirical probability integral transform."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MINMAX = "minmax"
PIT = "pit"
KINDS = (MINMAX, PIT)


@dataclass(frozen=True)
class TransformModel:
    """A fitted per-dimension transform.

    For ``minmax`` ``params`` holds ``(x_min, x_max)`` rows; for ``pit`` it
    holds the sorted training values of each dimension (one row each).
    """

    kind: str
    params: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.params) if self.kind == PIT else self.params[0].shape[0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": [p.tolist() for p in self.params]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "TransformModel":
        return cls(data["kind"], tuple(np.asarray(p, dtype=float) for p in data["params"]))


def _points(data) -> np.ndarray:
    pts = getattr(data, "points", data)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def fit(kind: str, data) -> TransformModel:
    pts = _points(data)
    if len(pts) < 2:
        raise ValueError("need at least 2 points to fit a transform")
    if kind == MINMAX:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if np.any(hi <= lo):
            raise ValueError("degenerate dimension: all values equal")
        return TransformModel(MINMAX, (lo, hi))
    if kind == PIT:
        return TransformModel(PIT, tuple(np.sort(pts[:, j]) for j in range(pts.shape[1])))
    raise ValueError(f"unknown transform kind {kind!r}")


def _check_dim(model: TransformModel, pts: np.ndarray) -> None:
    if pts.shape[1] != model.dim:
        raise ValueError(f"model has dim {model.dim}, points have dim {pts.shape[1]}")


def pit_values(reference: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Mid-rank empirical CDF ``(#{ref < x} + #{ref == x}/2 + 1/4) / N``."""
    n = len(reference)
    below = np.searchsorted(reference, x, side="left")
    upto = np.searchsorted(reference, x, side="right")
    u = (below + 0.5 * (upto - below) + 0.25) / n
    # queries beyond the reference range would leave (0, 1)
    return np.clip(u, 0.25 / n, 1.0 - 0.25 / n)


def forward(model: TransformModel, points) -> np.ndarray:
    pts = _points(points)
    _check_dim(model, pts)
    if model.kind == MINMAX:
        lo, hi = model.params
        return np.clip((pts - lo) / (hi - lo), 0.0, 1.0)
    return np.column_stack([pit_values(ref, pts[:, j]) for j, ref in enumerate(model.params)])


def inverse(model: TransformModel, points) -> np.ndarray:
    u = _points(points)
    _check_dim(model, u)
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("inverse transform needs values in [0, 1]")
    if model.kind == MINMAX:
        lo, hi = model.params
        return lo + u * (hi - lo)
    cols = []
    for j, ref in enumerate(model.params):
        n = len(ref)
        knots = (np.arange(n) + 0.75) / n
        cols.append(np.interp(u[:, j], knots, ref))
    return np.column_stack(cols)


def analytic_o2d_cdf(x) -> np.ndarray:
    """Marginal CDF of points uniform on the unit circle."""
    return np.arcsin(np.clip(x, -1.0, 1.0)) / np.pi + 0.5


# Branches of the O-2D copula support as (slope, intercept, u1_lo, u1_hi).
_O2D_BRANCHES = (
    (1.0, 0.5, 0.0, 0.5),
    (-1.0, 0.5, 0.0, 0.5),
    (1.0, -0.5, 0.5, 1.0),
    (-1.0, 1.5, 0.5, 1.0),
)


def analytic_o2d_copula_support(u) -> np.ndarray:
    """Euclidean distance from each point in [0,1]^2 to the O-2D copula support."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    dists = []
    for slope, icpt, lo, hi in _O2D_BRANCHES:
        a = np.array([lo, slope * lo + icpt])
        b = np.array([hi, slope * hi + icpt])
        ab = b - a
        t = np.clip(((u - a) @ ab) / (ab @ ab), 0.0, 1.0)
        nearest = a + t[:, None] * ab
        dists.append(np.linalg.norm(u - nearest, axis=1))
    return np.min(dists, axis=0)
