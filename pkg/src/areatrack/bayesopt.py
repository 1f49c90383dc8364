"""Gaussian-process Bayesian optimization with expected improvement.

Used to tune the (confidence weight, distance weight) pair of the area
smoother by minimizing the combined objective J, but works for any cheap
black-box function over a box domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from .errors import DegenerateKernel, ObjectiveNonFinite

Point = tuple[float, float]


@dataclass(frozen=True)
class SearchSpec:
    bounds: tuple[tuple[float, float], ...] = ((0.0, 2.0), (0.0, 2.0))
    n_init: int = 5
    n_iter: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError("each dimension needs lower < upper")

    @property
    def dim(self) -> int:
        return len(self.bounds)


@dataclass
class OptResult:
    best_point: tuple[float, ...]
    best_value: float
    history: list[tuple[tuple[float, ...], float]]
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Gaussian process with Matern-5/2 kernel

_JITTER = 1e-6
_LENGTH_SCALES = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)


def _matern52(dist: np.ndarray, ls: float) -> np.ndarray:
    r = np.sqrt(5.0) * dist / ls
    return (1.0 + r + r * r / 3.0) * np.exp(-r)


class GpPosterior:
    """Zero-mean GP fitted on (possibly standardized) observations."""

    def __init__(self, X: np.ndarray, alpha: np.ndarray, chol: np.ndarray,
                 ls: float, signal_var: float, y_mean: float, y_scale: float):
        self.X = X
        self._alpha = alpha
        self._chol = chol
        self.length_scale = ls
        self.signal_var = signal_var
        self._y_mean = y_mean
        self._y_scale = y_scale

    def mean_var(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
        dist = np.linalg.norm(Xq[:, None, :] - self.X[None, :, :], axis=2)
        k = self.signal_var * _matern52(dist, self.length_scale)
        mu = k @ self._alpha
        w = solve_triangular(self._chol, k.T, lower=True)
        var = self.signal_var + _JITTER - np.sum(w * w, axis=0)
        var = np.maximum(var, 1e-12)
        return self._y_mean + self._y_scale * mu, (self._y_scale ** 2) * var

    def mean(self, Xq: np.ndarray) -> np.ndarray:
        return self.mean_var(Xq)[0]

    def variance(self, Xq: np.ndarray) -> np.ndarray:
        return self.mean_var(Xq)[1]


def gp_fit(points: Sequence[Sequence[float]], values: Sequence[float]) -> GpPosterior:
    """Fit by maximum marginal likelihood over a small length-scale grid.

    Signal variance has a closed-form ML solution per length scale.
    Observations are standardized internally; callers should pass inputs
    already scaled to roughly the unit box.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = np.asarray(values, dtype=np.float64)
    n = len(y)
    if n > 1 and np.allclose(X, X[0], atol=1e-12):
        raise DegenerateKernel("all training points identical")
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale < 1e-12:
        y_scale = 1.0
    ys = (y - y_mean) / y_scale
    dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)

    best = None
    for ls in _LENGTH_SCALES:
        K0 = _matern52(dist, ls) + _JITTER * np.eye(n)
        try:
            L = np.linalg.cholesky(K0)
        except np.linalg.LinAlgError:
            continue
        a = np.linalg.solve(K0, ys)
        s2 = float(ys @ a) / n
        s2 = max(s2, 1e-10)
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        # log marginal likelihood up to constants, profiled over signal var
        nll = 0.5 * n * math.log(s2) + 0.5 * logdet
        if best is None or nll < best[0]:
            best = (nll, ls, s2)
    if best is None:
        raise DegenerateKernel("no valid kernel on the length-scale grid")
    _, ls, s2 = best
    K = s2 * _matern52(dist, ls) + _JITTER * np.eye(n)
    L = np.linalg.cholesky(K)
    alpha = np.linalg.solve(K, ys)
    return GpPosterior(X, alpha, L, ls, s2, y_mean, y_scale)


def expected_improvement(gp: GpPosterior, incumbent: float, candidate: np.ndarray) -> np.ndarray:
    """EI for minimization; 0 where the posterior is certain."""
    mu, var = gp.mean_var(np.atleast_2d(candidate))
    sigma = np.sqrt(var)
    out = np.zeros_like(mu)
    ok = sigma > 1e-12
    z = (incumbent - mu[ok]) / sigma[ok]
    out[ok] = (incumbent - mu[ok]) * norm.cdf(z) + sigma[ok] * norm.pdf(z)
    return np.maximum(out, 0.0)


# ---------------------------------------------------------------------------
# optimizer loop


def optimize(objective: Callable[[tuple[float, ...]], float], spec: SearchSpec) -> OptResult:
    """Seeded quasi-random initialization followed by GP/EI iterations.

    Deterministic for a fixed seed: identical history point for point.
    Objective evaluations are cached by exact parameter tuple.
    """
    lo = np.array([b[0] for b in spec.bounds])
    hi = np.array([b[1] for b in spec.bounds])
    span = hi - lo
    rng = np.random.default_rng(spec.seed)
    cache: dict[tuple[float, ...], float] = {}
    history: list[tuple[tuple[float, ...], float]] = []
    X_unit: list[np.ndarray] = []
    y: list[float] = []

    def evaluate(unit: np.ndarray) -> float:
        pt = tuple((lo + unit * span).tolist())
        if pt in cache:
            val = cache[pt]
        else:
            val = float(objective(pt))
            if not math.isfinite(val):
                raise ObjectiveNonFinite(pt, val)
            cache[pt] = val
        X_unit.append(unit)
        y.append(val)
        history.append((pt, val))
        return val

    sobol = qmc.Sobol(d=spec.dim, scramble=True, seed=spec.seed)
    n_pow2 = 1 << (spec.n_init - 1).bit_length()
    for unit in sobol.random(n_pow2)[: spec.n_init]:
        evaluate(np.asarray(unit))

    diagnostics: dict = {"length_scales": []}
    for _ in range(spec.n_iter):
        incumbent = min(y)
        try:
            gp = gp_fit(np.array(X_unit), np.array(y))
        except DegenerateKernel:
            evaluate(rng.uniform(0.0, 1.0, size=spec.dim))
            continue
        diagnostics["length_scales"].append(gp.length_scale)
        cands = rng.uniform(0.0, 1.0, size=(512, spec.dim))
        ei = expected_improvement(gp, incumbent, cands)
        order = np.argsort(-ei)
        best_unit = cands[order[0]]
        best_ei = ei[order[0]]
        # local refinement from the strongest candidates
        for i in order[:2]:
            res = minimize(
                lambda u: -float(expected_improvement(gp, incumbent, u[None, :])[0]),
                cands[i],
                bounds=[(0.0, 1.0)] * spec.dim,
                method="L-BFGS-B",
                options={"maxiter": 15},
            )
            if -res.fun > best_ei:
                best_ei = -res.fun
                best_unit = np.clip(res.x, 0.0, 1.0)
        if best_ei <= 1e-14:
            best_unit = rng.uniform(0.0, 1.0, size=spec.dim)
        evaluate(best_unit)

    best_idx = int(np.argmin(y))
    return OptResult(
        best_point=history[best_idx][0],
        best_value=history[best_idx][1],
        history=history,
        diagnostics=diagnostics,
    )
