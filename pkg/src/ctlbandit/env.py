"""Synthetic sparse linear bandit environment and a feature-file adapter for real data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ContextSet",
    "EnvConfig",
    "FeatureDataset",
    "FeatureFileError",
    "FeatureEnvironment",
    "SparseParameter",
    "SyntheticEnvironment",
    "gen_contexts",
    "gen_parameter",
    "instant_regret",
    "load_feature_file",
    "reward",
]

DEFAULT_NOISE_SD = math.sqrt(0.05)


class FeatureFileError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    d: int = 100
    K: int = 10
    s0: int = 5
    rho2: float = 0.3
    s_A: float = 5.0
    noise_sd: float = DEFAULT_NOISE_SD
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not 1 <= self.s0 <= self.d:
            raise ValueError(f"s0 must lie in [1, d={self.d}], got {self.s0}")
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if not 0 <= self.rho2 < 1:
            raise ValueError(f"rho2 must lie in [0, 1), got {self.rho2}")
        if not self.s_A > 0:
            raise ValueError(f"s_A must be positive, got {self.s_A}")
        if not self.noise_sd >= 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")


@dataclass(frozen=True)
class SparseParameter:
    theta: np.ndarray
    support: np.ndarray

    @property
    def s0(self) -> int:
        return int(self.support.size)

    @property
    def d(self) -> int:
        return int(self.theta.size)


@dataclass
class ContextSet:
    """One round's arms (``K x d``) and their expected rewards under the ground truth."""

    arms: np.ndarray
    means: np.ndarray

    @property
    def K(self) -> int:
        return self.arms.shape[0]


def gen_parameter(cfg: EnvConfig, rng: np.random.Generator) -> SparseParameter:
    if cfg.s0 > cfg.d:
        raise ValueError(f"s0={cfg.s0} exceeds d={cfg.d}")
    support = np.sort(rng.choice(cfg.d, size=cfg.s0, replace=False)).astype(np.intp)
    theta = np.zeros(cfg.d)
    theta[support] = rng.uniform(0.5, 2.0, size=cfg.s0)
    return SparseParameter(theta=theta, support=support)


def gen_contexts(cfg: EnvConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw ``K`` independent arms from N(0, V), V = (1 - rho2) I + rho2 11^T, then cap the inf-norm.

    Rows whose inf-norm exceeds ``s_A`` are scaled down onto the bound, others
    are left untouched.
    """
    g = rng.standard_normal((cfg.K, cfg.d))
    shared = rng.standard_normal((cfg.K, 1))
    arms = math.sqrt(1.0 - cfg.rho2) * g + math.sqrt(cfg.rho2) * shared
    norms = np.abs(arms).max(axis=1)
    scale = np.minimum(1.0, cfg.s_A / np.maximum(norms, np.finfo(float).tiny))
    arms *= scale[:, None]
    # scaling can land a hair above s_A in floating point
    np.clip(arms, -cfg.s_A, cfg.s_A, out=arms)
    return arms


def reward(arm, param: SparseParameter, noise_sd: float, rng: np.random.Generator) -> float:
    return float(np.dot(arm, param.theta) + noise_sd * rng.standard_normal())


def instant_regret(contexts, chosen: int, param: SparseParameter) -> float:
    arms = contexts.arms if isinstance(contexts, ContextSet) else np.asarray(contexts)
    if not 0 <= chosen < arms.shape[0]:
        raise IndexError(f"arm {chosen} out of range for {arms.shape[0]} arms")
    values = arms @ param.theta
    return float(values.max() - values[chosen])


class SyntheticEnvironment:
    def __init__(self, cfg: EnvConfig, param: SparseParameter):
        self.cfg = cfg
        self.param = param
        self.d = cfg.d
        self.K = cfg.K
        self.noise_sd = cfg.noise_sd

    @property
    def true_support(self):
        return self.param.support

    def sample(self, rng: np.random.Generator) -> ContextSet:
        arms = gen_contexts(self.cfg, rng)
        return ContextSet(arms=arms, means=arms @ self.param.theta)


@dataclass
class FeatureDataset:
    """Item features read from a feature file.

    ``means`` is the expected reward of every row: the stored column when the
    file says ``reward=col``, otherwise the least-squares fit ``features @ theta``.
    """

    features: np.ndarray
    means: np.ndarray
    reward_mode: str
    theta: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def sample_contexts(self, K: int, rng: np.random.Generator) -> ContextSet:
        n = self.features.shape[0]
        if K > n:
            raise ValueError(f"cannot draw {K} distinct items from {n} rows")
        idx = rng.choice(n, size=K, replace=False)
        return ContextSet(arms=self.features[idx], means=self.means[idx])


class FeatureEnvironment:
    def __init__(self, dataset: FeatureDataset, K: int, noise_sd: float = DEFAULT_NOISE_SD):
        self.dataset = dataset
        self.d = dataset.d
        self.K = K
        self.noise_sd = noise_sd
        self.true_support = None

    def sample(self, rng: np.random.Generator) -> ContextSet:
        return self.dataset.sample_contexts(self.K, rng)


def _parse_header(line: str, path) -> tuple[int, str]:
    fields = {}
    for part in line.strip().split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise FeatureFileError(f"{path}: line 1: malformed header field {part!r}")
        fields[key.strip()] = value.strip()
    if set(fields) != {"d", "reward"}:
        raise FeatureFileError(f"{path}: line 1: header must be 'd=<int>,reward=<col|fitted>', got {line.strip()!r}")
    try:
        d = int(fields["d"])
    except ValueError:
        raise FeatureFileError(f"{path}: line 1: d is not an integer: {fields['d']!r}") from None
    if d < 1:
        raise FeatureFileError(f"{path}: line 1: d must be positive")
    if fields["reward"] not in ("col", "fitted"):
        raise FeatureFileError(f"{path}: line 1: reward must be 'col' or 'fitted', got {fields['reward']!r}")
    return d, fields["reward"]


def load_feature_file(path) -> FeatureDataset:
    """Read a UTF-8 CSV of item features.

    Format: a header ``d=<int>,reward=<col|fitted>`` followed by one row per
    item holding ``d`` feature values and a trailing reward value. With
    ``reward=col`` the trailing value is the item's expected reward; with
    ``reward=fitted`` it is a regression target, and expected rewards come from
    a least-squares ``theta`` fitted once over the whole file.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FeatureFileError(f"{path}: empty file")
    d, mode = _parse_header(lines[0], path)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise FeatureFileError(f"{path}: line {lineno}: expected {d + 1} values, got {len(parts)}")
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise FeatureFileError(f"{path}: line {lineno}: non-numeric value") from None
        if not all(math.isfinite(v) for v in values):
            raise FeatureFileError(f"{path}: line {lineno}: non-finite value")
        rows.append(values)
    if not rows:
        raise FeatureFileError(f"{path}: no data rows")
    data = np.array(rows)
    features, target = data[:, :d], data[:, d]
    if mode == "col":
        return FeatureDataset(features=features, means=target, reward_mode=mode)
    theta, *_ = np.linalg.lstsq(features, target, rcond=None)
    return FeatureDataset(features=features, means=features @ theta, reward_mode=mode, theta=theta)
