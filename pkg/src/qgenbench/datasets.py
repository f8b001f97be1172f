"""Synthetic benchmark datasets (mixed Gaussian, X, O) and stock-return loading."""
from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NAMES = ("mg", "x", "o", "stocks")
DEFAULT_SIZES = {2: 50_000, 3: 100_000}


class DatasetError(ValueError):
    pass


@dataclass
class RawDataset:
    name: str
    dim: int
    points: np.ndarray
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.points)


def _check_dim(dim: int) -> None:
    if dim not in (2, 3):
        raise DatasetError(f"dim must be 2 or 3, got {dim}")


def _size(dim: int, n: int | None) -> int:
    return DEFAULT_SIZES[dim] if n is None else int(n)


def gen_mixed_gaussian(dim: int, n: int | None = None, seed: int = 0) -> RawDataset:
    """50/50 mixture of two Gaussians whose means/covariances are drawn from ``seed``.

    Means ~ U(-1, 1)^dim, covariances S S^T + 0.05 I with S_ij ~ U(-0.3, 0.3).
    """
    _check_dim(dim)
    n = _size(dim, n)
    rng = np.random.default_rng(seed)
    means = rng.uniform(-1, 1, size=(2, dim))
    s = rng.uniform(-0.3, 0.3, size=(2, dim, dim))
    covs = s @ np.swapaxes(s, 1, 2) + 0.05 * np.eye(dim)
    labels = rng.integers(0, 2, size=n)
    chol = np.linalg.cholesky(covs)
    z = rng.standard_normal((n, dim))
    points = means[labels] + np.einsum("nij,nj->ni", chol[labels], z)
    meta = {"means": means.tolist(), "covariances": covs.tolist(), "labels_mean": float(labels.mean())}
    return RawDataset("mg", dim, points, seed, meta)


# 3D X: the four main diagonals of the cube, directions t * (+-1, +-1, 1)
_X3_DIRECTIONS = np.array([[1, 1, 1], [-1, 1, 1], [1, -1, 1], [-1, -1, 1]], dtype=float)


def gen_x(dim: int, n: int | None = None, seed: int = 0) -> RawDataset:
    _check_dim(dim)
    n = _size(dim, n)
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1, 1, size=n)
    if dim == 2:
        branch = rng.choice([1.0, -1.0], size=n)
        points = np.column_stack([t, branch * t])
        labels = (branch < 0).astype(int)
    else:
        labels = rng.integers(0, 4, size=n)
        points = t[:, None] * _X3_DIRECTIONS[labels]
    return RawDataset("x", dim, points, seed, {"branch_counts": np.bincount(labels).tolist()})


def gen_o(dim: int, n: int | None = None, seed: int = 0) -> RawDataset:
    _check_dim(dim)
    n = _size(dim, n)
    rng = np.random.default_rng(seed)
    if dim == 2:
        phi = rng.uniform(0, 2 * np.pi, size=n)
        points = np.column_stack([np.cos(phi), np.sin(phi)])
    else:
        g = rng.standard_normal((n, 3))
        points = g / np.linalg.norm(g, axis=1, keepdims=True)
    return RawDataset("o", dim, points, seed)


GENERATORS = {"mg": gen_mixed_gaussian, "x": gen_x, "o": gen_o}


def generate(name: str, dim: int, n: int | None = None, seed: int = 0) -> RawDataset:
    try:
        gen = GENERATORS[name.lower()]
    except KeyError:
        raise DatasetError(f"unknown synthetic dataset {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(dim, n, seed)


def _read_close_series(path: Path, date_col: str, close_col: str) -> dict[_dt.date, float]:
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    series: dict[_dt.date, float] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or date_col not in reader.fieldnames or close_col not in reader.fieldnames:
                raise DatasetError(f"{path}: needs columns {date_col!r} and {close_col!r}")
            for row in reader:
                raw_date, raw_close = row[date_col], row[close_col]
                if not raw_date or not raw_close:
                    continue  # missing value, row dropped
                price = float(raw_close)
                if price <= 0:
                    raise DatasetError(f"{path}: non-positive price {price} on {raw_date}")
                series[_dt.date.fromisoformat(raw_date.strip()[:10])] = price
    except (ValueError, csv.Error) as exc:
        if isinstance(exc, DatasetError):
            raise
        raise DatasetError(f"{path}: cannot parse CSV ({exc})") from exc
    return series


def load_stocks(csv_paths, date_col: str = "date", close_col: str = "close") -> RawDataset:
    """Simultaneous daily returns ``(c_t - c_{t-1}) / c_{t-1}`` of several price series."""
    paths = [Path(p) for p in csv_paths]
    if not paths:
        raise DatasetError("need at least one CSV file")
    all_series = [_read_close_series(p, date_col, close_col) for p in paths]
    common = sorted(set.intersection(*(set(s) for s in all_series)))
    if len(common) < 2:
        raise DatasetError("fewer than 2 common dates across the CSV files")
    closes = np.array([[s[day] for s in all_series] for day in common])
    returns = np.diff(closes, axis=0) / closes[:-1]
    meta = {"files": [str(p) for p in paths], "first_date": common[0].isoformat(), "last_date": common[-1].isoformat()}
    return RawDataset("stocks", len(paths), returns, None, meta)


def write_synthetic_stock_csv(path, seed: int, n_rows: int = 1878, start: str = "2015-01-02") -> None:
    """Geometric random walk prices on business days, for tests and demos."""
    rng = np.random.default_rng(seed)
    log_ret = rng.normal(0.0003, 0.015, size=n_rows - 1)
    prices = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(log_ret)]))
    day = _dt.date.fromisoformat(start)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for price in prices:
            while day.weekday() >= 5:
                day += _dt.timedelta(days=1)
            writer.writerow([day.isoformat(), f"{price:.6f}"])
            day += _dt.timedelta(days=1)


def bundled_stock_csvs() -> list[Path]:
    data_dir = Path(__file__).parent / "data"
    return sorted(data_dir.glob("stock_*.csv"))


def save_csv(points: np.ndarray, path) -> None:
    points = np.atleast_2d(points)
    header = ",".join(f"x{i + 1}" for i in range(points.shape[1]))
    np.savetxt(path, points, delimiter=",", header=header, comments="", fmt="%.17g")


def load_csv(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"{path}: cannot parse CSV ({exc})") from exc
    return data
