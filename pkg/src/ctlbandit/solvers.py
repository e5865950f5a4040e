"""Numerical kernels: Lasso by cyclic coordinate descent and ridge sufficient statistics.

The Lasso objective throughout is

    (1/t) * ||y - X theta||_2^2 + lam * ||theta||_1

with ``t`` the number of rows of ``X``. The smooth part has gradient
``2 * (G theta - c)`` where ``G = X^T X / t`` and ``c = X^T y / t``, so every
kernel works on the Gram form ``(G, c)`` and the raw design is only touched
once per fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numba import njit

__all__ = [
    "LassoConfig",
    "LassoResult",
    "RidgeState",
    "lasso_fit",
    "lasso_fit_gram",
    "lasso_objective",
    "lambda_max",
    "ridge_estimate",
    "ridge_update",
    "soft_threshold",
]


def soft_threshold(z, gamma):
    """Return ``sign(z) * max(|z| - gamma, 0)``; works on scalars and arrays."""
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("gamma must be non-negative")
    out = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LassoConfig:
    lam: float = 0.1
    max_iters: int = 10_000
    tol: float = 1e-7

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class LassoResult:
    coef: np.ndarray
    n_iter: int
    converged: bool
    # objective value after each sweep (index 0 is the starting point); empty unless requested
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))


@njit(cache=True)
def _cd_gram(G, c, yy, theta, lam, tol, max_iters, record):
    d = G.shape[0]
    half = 0.5 * lam
    trace = np.empty(max_iters + 1 if record else 0)
    Gtheta = G @ theta
    if record:
        trace[0] = yy - 2.0 * (c @ theta) + theta @ Gtheta + lam * np.sum(np.abs(theta))
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        max_delta = 0.0
        for j in range(d):
            gjj = G[j, j]
            old = theta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                z = c[j] - (Gtheta[j] - gjj * old)
                if z > half:
                    new = (z - half) / gjj
                elif z < -half:
                    new = (z + half) / gjj
                else:
                    new = 0.0
            delta = new - old
            if delta != 0.0:
                theta[j] = new
                for k in range(d):
                    Gtheta[k] += delta * G[k, j]
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        # exact recompute, incremental updates drift
        Gtheta = G @ theta
        if record:
            trace[it] = yy - 2.0 * (c @ theta) + theta @ Gtheta + lam * np.sum(np.abs(theta))
        if max_delta <= tol:
            viol = 0.0
            for j in range(d):
                g = 2.0 * (Gtheta[j] - c[j])
                if theta[j] > 0.0:
                    v = abs(g + lam)
                elif theta[j] < 0.0:
                    v = abs(g - lam)
                else:
                    v = abs(g) - lam
                if v > viol:
                    viol = v
            if viol <= tol:
                converged = True
                break
    return theta, it, converged, trace[: it + 1] if record else trace


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


def _kkt_violation(G, c, theta, lam) -> float:
    grad = 2.0 * (G @ theta - c)
    nz = theta != 0
    viol = np.maximum(np.abs(grad) - lam, 0.0)
    viol[nz] = np.abs(grad[nz] + lam * np.sign(theta[nz]))
    return float(viol.max()) if viol.size else 0.0


def _drop_null_directions(G, theta):
    """Shrink the active set while its Gram block is singular.

    Moving along a null vector of the active block leaves the fit unchanged,
    so we move in the direction that does not increase the l1 norm until a
    coordinate reaches zero.
    """
    theta = theta.copy()
    while True:
        active = np.flatnonzero(theta)
        if active.size == 0:
            return theta
        w, V = np.linalg.eigh(G[np.ix_(active, active)])
        if w[0] > 1e-10 * max(w[-1], 1.0):
            return theta
        v = V[:, 0]
        if np.sign(theta[active]) @ v > 0:
            v = -v
        shrinking = theta[active] * v < 0
        if not shrinking.any():
            v = -v
            shrinking = theta[active] * v < 0
        steps = -theta[active][shrinking] / v[shrinking]
        k = int(np.argmin(steps))
        theta[active] += steps[k] * v
        theta[active[np.flatnonzero(shrinking)[k]]] = 0.0


def _polish(G, c, theta, lam, tol, max_steps=None):
    """Active-set search started from a coordinate-descent iterate.

    Alternates an exact solve on the signed active set with a line search over
    the sign-change points; once the active set is optimal, the worst KKT
    violator enters through an exact one-coordinate update. Every step is
    non-increasing in the objective. Returns the point only once it passes the
    full KKT check, otherwise ``None``.
    """

    def f(z):
        return z @ G @ z - 2.0 * (c @ z) + lam * np.abs(z).sum()

    x = theta.copy()
    max_steps = max_steps or 4 * x.size + 10
    for _ in range(max_steps):
        x = _drop_null_directions(G, x)
        signs = np.sign(x)
        grad = 2.0 * (G @ x - c)
        nz = signs != 0
        if np.all(np.abs(grad[nz] + lam * signs[nz]) <= tol):
            viol = np.where(nz, -np.inf, np.abs(grad) - lam)
            j = int(np.argmax(viol))
            if viol[j] <= tol:
                return x
            z = -0.5 * grad[j]
            x[j] = np.sign(z) * (abs(z) - 0.5 * lam) / G[j, j]
            continue
        active = np.flatnonzero(signs)
        target, *_ = np.linalg.lstsq(G[np.ix_(active, active)], c[active] - 0.5 * lam * signs[active], rcond=None)
        start = x[active]
        step = target - start
        crossing = start * target < 0
        alphas = np.append(start[crossing] / (start[crossing] - target[crossing]), 1.0)
        best, best_val = None, f(x)
        for a in alphas:
            cand = x.copy()
            cand[active] = start + a * step
            if a < 1.0:
                cand[active[np.argmin(np.abs(cand[active]) + np.where(crossing, 0.0, np.inf))]] = 0.0
            val = f(cand)
            if val <= best_val:
                best, best_val = cand, val
        if best is None:
            return None
        x = best
    return None


# sweeps between polish attempts
_CHUNK = 100


def lasso_fit_gram(G, c, yy, cfg: LassoConfig, warm_start=None, record_objective=False) -> LassoResult:
    """Coordinate descent on precomputed ``G = X^T X / t``, ``c = X^T y / t``, ``yy = y^T y / t``."""
    G = np.ascontiguousarray(G, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    d = c.shape[0]
    if G.shape != (d, d):
        raise ValueError(f"Gram shape {G.shape} does not match c of length {d}")
    if warm_start is None:
        theta = np.zeros(d)
    else:
        theta = np.array(warm_start, dtype=np.float64)
        if theta.shape != (d,):
            raise ValueError(f"warm start has shape {theta.shape}, expected ({d},)")
    lam, tol, yy = float(cfg.lam), float(cfg.tol), float(yy)
    traces = []
    done, converged = 0, False
    while done < cfg.max_iters:
        budget = min(_CHUNK, cfg.max_iters - done)
        theta, n, converged, trace = _cd_gram(G, c, yy, theta, lam, tol, budget, bool(record_objective))
        traces.append(trace if not traces else trace[1:])
        done += n
        if converged or done >= cfg.max_iters:
            break
        polished = _polish(G, c, theta, lam, tol)
        if polished is not None:
            theta, converged = polished, True
            if record_objective:
                value = yy - 2.0 * (c @ theta) + theta @ G @ theta + lam * np.abs(theta).sum()
                traces.append(np.array([value]))
            break
    trace = np.concatenate(traces) if record_objective else np.empty(0)
    return LassoResult(coef=theta, n_iter=done, converged=converged, objective_trace=trace)


def lasso_fit(X, y, cfg: LassoConfig | None = None, warm_start=None, record_objective=False) -> LassoResult:
    """Minimise ``(1/t)||y - X theta||^2 + lam ||theta||_1`` by cyclic coordinate descent.

    Stops once a full sweep moves no coordinate by more than ``cfg.tol`` and the
    KKT residual is also below ``cfg.tol``. Hitting ``cfg.max_iters`` is not an
    error: the last iterate is returned with ``converged=False``.
    """
    cfg = cfg or LassoConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError(f"X must be a 2-D array with at least one column, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if X.shape[0] < 1:
        raise ValueError("lasso_fit needs at least one observation")
    _check_finite("X", X)
    _check_finite("y", y)
    t = X.shape[0]
    return lasso_fit_gram(X.T @ X / t, X.T @ y / t, y @ y / t, cfg, warm_start, record_objective)


def lasso_objective(X, y, theta, lam) -> float:
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(y, dtype=np.float64) - X @ theta
    return float(r @ r / X.shape[0] + lam * np.abs(theta).sum())


def lambda_max(X, y) -> float:
    """Smallest ``lam`` for which the all-zero vector is optimal."""
    X = np.asarray(X, dtype=np.float64)
    return float(np.max(np.abs(2.0 / X.shape[0] * (X.T @ np.asarray(y, dtype=np.float64)))))


@dataclass
class RidgeState:
    """Ridge sufficient statistics ``M = I + sum a a^T`` and ``b = sum y a`` on a support."""

    support: np.ndarray
    M: np.ndarray
    b: np.ndarray

    @classmethod
    def identity(cls, support) -> RidgeState:
        support = np.asarray(support, dtype=np.intp)
        k = support.size
        return cls(support=support, M=np.eye(k), b=np.zeros(k))

    @classmethod
    def from_batch(cls, support, A, y) -> RidgeState:
        """Build the state in one shot from rows ``A`` (already restricted to ``support``)."""
        state = cls.identity(support)
        A = np.asarray(A, dtype=np.float64).reshape(-1, state.support.size)
        y = np.asarray(y, dtype=np.float64)
        if A.shape[0] != y.shape[0]:
            raise ValueError(f"{A.shape[0]} rows but {y.shape[0]} rewards")
        state.M += A.T @ A
        state.b += A.T @ y
        return state

    @property
    def dim(self) -> int:
        return self.support.size

    def update(self, a, reward) -> None:
        """In-place rank-one update."""
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (self.dim,):
            raise ValueError(f"context has shape {a.shape}, expected ({self.dim},)")
        self.M += np.outer(a, a)
        self.b += reward * a

    def copy(self) -> RidgeState:
        return RidgeState(self.support.copy(), self.M.copy(), self.b.copy())


def ridge_update(state: RidgeState, a, reward) -> RidgeState:
    new = state.copy()
    new.update(a, reward)
    return new


def ridge_estimate(state: RidgeState) -> np.ndarray:
    if state.dim == 0:
        return np.zeros(0)
    factor = scipy.linalg.cho_factor(state.M, lower=True, check_finite=False)
    return scipy.linalg.cho_solve(factor, state.b, check_finite=False)
