"""(mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation.

Follows the standard formulation (rank-one plus rank-mu covariance update,
log-decreasing recombination weights). Usage is ask/tell::

    es = CmaEs(x0, sigma=0.1, seed=1)
    while not done:
        xs = es.ask()
        es.tell(xs, [f(x) for x in xs])
"""
from __future__ import annotations

import math

import numpy as np

EIGEN_FLOOR = 1e-14


class CmaEs:
    def __init__(self, x0, sigma: float = 0.1, seed=None, popsize: int | None = None):
        self.mean = np.array(x0, dtype=float)
        n = self.dim = self.mean.size
        if n < 1:
            raise ValueError("dimension must be >= 1")
        if sigma <= 0:
            raise ValueError("sigma must be > 0")
        self.sigma = float(sigma)
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

        self.popsize = popsize or 4 + int(math.floor(3 * math.log(n)))
        self.mu = self.popsize // 2
        w = math.log((self.popsize + 1) / 2) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)

        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.ds = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1, 2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))

        self.ps = np.zeros(n)
        self.pc = np.zeros(n)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.generation = 0
        self.repairs = 0

    def ask(self) -> np.ndarray:
        z = self.rng.standard_normal((self.popsize, self.dim))
        y = (z * self.D) @ self.B.T
        self._y = y
        return self.mean + self.sigma * y

    def tell(self, solutions, values) -> None:
        values = np.asarray(values, dtype=float)
        order = np.argsort(values, kind="stable")[: self.mu]
        y = (np.asarray(solutions) - self.mean) / self.sigma
        y_sel = y[order]
        y_w = self.weights @ y_sel
        n = self.dim

        self.mean = self.mean + self.sigma * y_w
        inv_sqrt_c_yw = self.B @ ((self.B.T @ y_w) / self.D)
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * inv_sqrt_c_yw
        self.generation += 1
        ps_norm = np.linalg.norm(self.ps)
        h_sig = ps_norm / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation)) / self.chi_n < 1.4 + 2 / (n + 1)
        self.pc = (1 - self.cc) * self.pc + h_sig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y_w

        rank_mu = (y_sel.T * self.weights) @ y_sel
        self.C = (
            (1 - self.c1 - self.cmu) * self.C
            + self.c1 * (np.outer(self.pc, self.pc) + (1 - h_sig) * self.cc * (2 - self.cc) * self.C)
            + self.cmu * rank_mu
        )
        self.sigma *= math.exp((self.cs / self.ds) * (ps_norm / self.chi_n - 1))
        self._decompose()

    def _decompose(self) -> None:
        self.C = (self.C + self.C.T) / 2
        evals, evecs = np.linalg.eigh(self.C)
        if evals.min() < EIGEN_FLOOR:
            # lost positive-definiteness numerically
            self.repairs += 1
            evals = np.maximum(evals, EIGEN_FLOOR)
            self.C = (evecs * evals) @ evecs.T
        self.B = evecs
        self.D = np.sqrt(evals)


def cmaes_minimize(objective, dim: int, budget: int, seed=None, x0=None, sigma0: float = 0.1):
    """Minimise ``objective`` with at most ``budget`` evaluations.

    Returns ``(best_x, best_value)`` over every evaluated point.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    x0 = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float)
    es = CmaEs(x0, sigma0, seed)
    best_x, best_f = x0.copy(), float(objective(x0))
    evals = 1
    while evals + es.popsize <= budget:
        xs = es.ask()
        fs = [float(objective(x)) for x in xs]
        evals += len(fs)
        i = int(np.argmin(fs))
        if fs[i] < best_f:
            best_x, best_f = xs[i].copy(), fs[i]
        es.tell(xs, fs)
        if es.sigma * es.D.max() < 1e-16:
            break
    return best_x, best_f
