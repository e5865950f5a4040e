"""Per-agent state shared by the centralized and decentralized thresholded-Lasso bandits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .comm import as_support
from .estimators import ThresholdedLasso
from .solvers import RidgeState, ridge_estimate

logger = logging.getLogger(__name__)

CENTRALIZED = "centralized"
DECENTRALIZED = "decentralized"


@dataclass(frozen=True)
class SyncParams:
    lambda0: float = 0.1
    xi: float = 2.0
    mode: str = CENTRALIZED
    N: int = 10

    def __post_init__(self):
        if not self.xi > 1:
            raise ValueError(f"xi must exceed 1, got {self.xi}")
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.mode not in (CENTRALIZED, DECENTRALIZED):
            raise ValueError(f"unknown sync mode {self.mode!r}")


def lambda_schedule(t: int, lambda0: float, d: int) -> float:
    """``lambda0 * sqrt(2 log(t) log(d) / t)``; zero at ``t = 1``."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    return lambda0 * math.sqrt(2.0 * math.log(t) * math.log(d) / t)


def threshold_value(params: SyncParams, lambda_t: float) -> float:
    if lambda_t < 0:
        raise ValueError("lambda_t must be non-negative")
    if params.mode == CENTRALIZED:
        return params.N * lambda_t
    return 2.0 * lambda_t


@dataclass
class AgentHistory:
    """Append-only log of full-dimensional chosen arms and their rewards."""

    contexts: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    def append(self, arm, reward: float) -> None:
        self.contexts.append(np.array(arm, dtype=np.float64))
        self.rewards.append(float(reward))

    def __len__(self):
        return len(self.rewards)

    def arrays(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        if not self.contexts:
            return np.empty((0, d)), np.empty(0)
        return np.vstack(self.contexts), np.asarray(self.rewards)


class Agent:
    """Greedy ridge player on a reduced support, refreshed by thresholded Lasso at sync rounds."""

    def __init__(self, agent_id: int, d: int, lasso_tol: float = 1e-7, lasso_max_iters: int = 10_000):
        self.id = agent_id
        self.d = d
        self.history = AgentHistory()
        self.active_support = np.arange(d, dtype=np.intp)
        self.ridge = RidgeState.identity(self.active_support)
        self.theta_hat = np.zeros(d)
        self.n_fallbacks = 0
        # previous sync's fit seeds the next one
        self.selector = ThresholdedLasso(tol=lasso_tol, max_iter=lasso_max_iters, warm_start=True)

    def select_arm(self, arms) -> int:
        """Arm maximising the estimated reward on the active support; ties go to the lowest index."""
        arms = arms.arms if hasattr(arms, "arms") else np.asarray(arms)
        scores = arms[:, self.active_support] @ self.theta_hat
        return int(np.argmax(scores))

    def observe(self, full_arm, reward: float) -> Agent:
        full_arm = np.asarray(full_arm, dtype=np.float64)
        if full_arm.shape != (self.d,):
            raise ValueError(f"arm has shape {full_arm.shape}, expected ({self.d},)")
        self.history.append(full_arm, reward)
        self.ridge.update(full_arm[self.active_support], reward)
        self.theta_hat = ridge_estimate(self.ridge)
        return self

    def local_support_estimate(self, lambda_t: float, threshold: float) -> np.ndarray:
        """Lasso on the full ``d``-column history, keeping coordinates with ``|coef| > threshold``."""
        if len(self.history) == 0:
            return np.arange(self.d, dtype=np.intp)
        X, y = self.history.arrays(self.d)
        self.selector.set_params(alpha=lambda_t, threshold=threshold)
        self.selector.fit(X, y)
        if not self.selector.lasso_.converged_:
            logger.debug("agent %d: Lasso hit the iteration cap at t=%d", self.id, len(y))
        return self.selector.get_support(indices=True).astype(np.intp)

    def adopt_support(self, new_support) -> Agent:
        """Switch to ``new_support`` and rebuild the ridge statistics from the stored history."""
        support = as_support(new_support, self.d)
        if support.size == 0:
            logger.info("agent %d: empty support after thresholding, falling back to {0}", self.id)
            self.n_fallbacks += 1
            support = np.zeros(1, dtype=np.intp)
        X, y = self.history.arrays(self.d)
        self.active_support = support
        self.ridge = RidgeState.from_batch(support, X[:, support], y)
        self.theta_hat = ridge_estimate(self.ridge)
        return self
