"""Seeded experiment runs for the cooperative bandits and single-agent baselines."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .agents import CENTRALIZED, DECENTRALIZED, Agent, SyncParams, lambda_schedule, threshold_value
from .comm import (
    SERVER,
    CommLog,
    SyncMessage,
    gen_random_connected_graph,
    peer_exchange,
    record_comm,
    server_aggregate,
    star_topology,
    sync_grid,
)
from .env import EnvConfig, FeatureEnvironment, SyntheticEnvironment, gen_parameter, load_feature_file
from .solvers import LassoConfig, lasso_fit_gram

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

ALGOS = ("cctl", "dctl", "sa_lasso", "th_lasso_single")
SINGLE_AGENT = ("sa_lasso", "th_lasso_single")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; field names double as config-file keys."""

    algo: str = "cctl"
    N: int = 10
    T: int = 1000
    d: int = 100
    K: int = 10
    s0: int = 5
    rho2: float = 0.3
    s_A: float = 5.0
    noise_sd: float = math.sqrt(0.05)
    lambda0: float = 0.1
    xi: float = 2.0
    replicas: int = 10
    seed_base: int = 0
    out_dir: str = "results"
    feature_file: str = ""
    # empty grid disables tuning
    lambda0_grid: tuple[float, ...] = ()
    tune_replicas: int = 3
    tune_seed_offset: int = 1_000_000
    lasso_tol: float = 1e-7
    lasso_max_iters: int = 10_000

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {', '.join(ALGOS)}, got {self.algo!r}")
        object.__setattr__(self, "lambda0_grid", tuple(float(v) for v in self.lambda0_grid))
        checks = [
            (self.N >= 1, "N must be >= 1"),
            (self.T >= 1, "T must be >= 1"),
            (self.d >= 2, "d must be >= 2"),
            (self.replicas >= 1, "replicas must be >= 1"),
            (self.seed_base >= 0, "seed_base must be >= 0"),
            (self.tune_replicas >= 1, "tune_replicas must be >= 1"),
            (all(v > 0 for v in self.lambda0_grid), "lambda0_grid values must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            self.env
            self.sync
            LassoConfig(lam=0.0, max_iters=self.lasso_max_iters, tol=self.lasso_tol)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def env(self) -> EnvConfig:
        return EnvConfig(d=self.d, K=self.K, s0=self.s0, rho2=self.rho2, s_A=self.s_A, noise_sd=self.noise_sd)

    @property
    def sync(self) -> SyncParams:
        mode = DECENTRALIZED if self.algo == "dctl" else CENTRALIZED
        return SyncParams(lambda0=self.lambda0, xi=self.xi, mode=mode, N=self.N)

    @property
    def n_agents(self) -> int:
        return 1 if self.algo in SINGLE_AGENT else self.N

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        """Render as the same flat ``key = value`` TOML the loader reads."""
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, str):
                text = '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
            elif isinstance(value, tuple):
                text = "[" + ", ".join(repr(float(v)) for v in value) + "]"
            else:
                text = repr(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"{key} must be a list of numbers, got {value!r}")
    return tuple(float(v) for v in value)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = sorted(set(raw) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"{source}: unknown key(s): {', '.join(unknown)}")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in raw.items()})


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


class SyncRecord(NamedTuple):
    t: int
    local: tuple[np.ndarray, ...]
    aggregated: tuple[np.ndarray, ...]
    # peer each agent pulled from; empty for the star topology
    partners: tuple[int, ...] = ()


@dataclass
class RegretTrace:
    algo: str
    instant: np.ndarray
    comm: CommLog = field(default_factory=CommLog)
    syncs: list[SyncRecord] = field(default_factory=list)
    final_supports: list[np.ndarray] = field(default_factory=list)
    true_support: np.ndarray | None = None
    lambda0: float = float("nan")
    replica_seed: int = 0
    n_fallbacks: int = 0

    def __post_init__(self):
        self.instant = np.asarray(self.instant, dtype=np.float64)
        self.cumulative = np.cumsum(self.instant, axis=1)

    @property
    def n_agents(self) -> int:
        return self.instant.shape[0]

    @property
    def T(self) -> int:
        return self.instant.shape[1]


class _Streams:
    """Independent RNG streams for one replica.

    Agent ``i`` always gets the same context and noise streams whatever the
    number of agents or the algorithm, so a batch of algorithms sees identical
    environments.
    """

    def __init__(self, replica_seed: int, n_agents: int):
        root = np.random.SeedSequence(replica_seed)
        param_ss, comm_ss, agents_ss = root.spawn(3)
        self.param = np.random.default_rng(param_ss)
        self.comm = np.random.default_rng(comm_ss)
        self.contexts, self.noise = [], []
        for agent_ss in agents_ss.spawn(n_agents):
            ctx_ss, noise_ss = agent_ss.spawn(2)
            self.contexts.append(np.random.default_rng(ctx_ss))
            self.noise.append(np.random.default_rng(noise_ss))


def build_environment(cfg: ExperimentConfig, rng: np.random.Generator):
    if cfg.feature_file:
        return FeatureEnvironment(load_feature_file(cfg.feature_file), K=cfg.K, noise_sd=cfg.noise_sd)
    env_cfg = cfg.env
    return SyntheticEnvironment(env_cfg, gen_parameter(env_cfg, rng))


def _support_tuple(support) -> tuple[int, ...]:
    return tuple(int(j) for j in support)


def run_ctl(cfg: ExperimentConfig, replica_seed: int) -> RegretTrace:
    """One replica of the centralized (``cctl``) or decentralized (``dctl``) algorithm."""
    if cfg.algo not in ("cctl", "dctl"):
        raise ConfigError(f"run_ctl handles cctl/dctl, got {cfg.algo!r}")
    N, T = cfg.N, cfg.T
    params = cfg.sync
    streams = _Streams(replica_seed, N)
    env = build_environment(cfg, streams.param)
    d = env.d
    agents = [Agent(i, d, cfg.lasso_tol, cfg.lasso_max_iters) for i in range(N)]
    topology = star_topology(N) if params.mode == CENTRALIZED else gen_random_connected_graph(N, streams.comm)
    grid = set(sync_grid(params.xi, T))
    instant = np.zeros((N, T))
    comm = CommLog()
    syncs = []

    for t in range(1, T + 1):
        for i, agent in enumerate(agents):
            ctx = env.sample(streams.contexts[i])
            noise = env.noise_sd * streams.noise[i].standard_normal()
            k = agent.select_arm(ctx.arms)
            agent.observe(ctx.arms[k], ctx.means[k] + noise)
            instant[i, t - 1] = ctx.means.max() - ctx.means[k]
        if t not in grid:
            continue
        lam = lambda_schedule(t, params.lambda0, d)
        thr = threshold_value(params, lam)
        local = [agent.local_support_estimate(lam, thr) for agent in agents]
        if params.mode == CENTRALIZED:
            union = server_aggregate(local)
            aggregated, partners = [union] * N, ()
            messages = [SyncMessage(i, t, _support_tuple(s)) for i, s in enumerate(local)]
            messages += [SyncMessage(SERVER, t, _support_tuple(union)) for _ in range(N)]
        else:
            aggregated, partners = peer_exchange(topology, local, streams.comm)
            messages = [SyncMessage(j, t, _support_tuple(local[j])) for i, j in enumerate(partners) if j != i]
        for agent, support in zip(agents, aggregated):
            agent.adopt_support(support)
        record_comm(comm, t, topology.kind, messages)
        syncs.append(SyncRecord(t, tuple(local), tuple(a.active_support for a in agents), tuple(partners)))
        logger.debug("%s t=%d lambda=%.4g threshold=%.4g |S|=%s", cfg.algo, t, lam, thr, [len(s) for s in aggregated])

    return RegretTrace(
        algo=cfg.algo,
        instant=instant,
        comm=comm,
        syncs=syncs,
        final_supports=[a.active_support for a in agents],
        true_support=env.true_support,
        lambda0=cfg.lambda0,
        replica_seed=replica_seed,
        n_fallbacks=sum(a.n_fallbacks for a in agents),
    )


def _run_single(cfg: ExperimentConfig, replica_seed: int, thresholded: bool) -> RegretTrace:
    T = cfg.T
    streams = _Streams(replica_seed, 1)
    env = build_environment(cfg, streams.param)
    d = env.d
    gram, xty, yty, n = np.zeros((d, d)), np.zeros(d), 0.0, 0
    coef = np.zeros(d)
    theta = np.zeros(d)
    support = np.arange(d)
    fallbacks = 0
    instant = np.zeros((1, T))

    for t in range(1, T + 1):
        ctx = env.sample(streams.contexts[0])
        noise = env.noise_sd * streams.noise[0].standard_normal()
        if n > 0:
            lam_cfg = LassoConfig(lam=lambda_schedule(t, cfg.lambda0, d), max_iters=cfg.lasso_max_iters, tol=cfg.lasso_tol)
            G, c, yy = gram / n, xty / n, yty / n
            coef = lasso_fit_gram(G, c, yy, lam_cfg, warm_start=coef).coef
            if thresholded:
                support = np.flatnonzero(np.abs(coef) > lam_cfg.lam)
                if support.size == 0:
                    fallbacks += 1
                    support = np.zeros(1, dtype=np.intp)
                refit = lasso_fit_gram(G[np.ix_(support, support)], c[support], yy, lam_cfg, warm_start=coef[support])
                theta = np.zeros(d)
                theta[support] = refit.coef
            else:
                theta = coef
                support = np.flatnonzero(coef)
        k = int(np.argmax(ctx.arms @ theta))
        arm, y = ctx.arms[k], ctx.means[k] + noise
        gram += np.outer(arm, arm)
        xty += y * arm
        yty += y * y
        n += 1
        instant[0, t - 1] = ctx.means.max() - ctx.means[k]

    return RegretTrace(
        algo=cfg.algo,
        instant=instant,
        final_supports=[np.asarray(support, dtype=np.intp)],
        true_support=env.true_support,
        lambda0=cfg.lambda0,
        replica_seed=replica_seed,
        n_fallbacks=fallbacks,
    )


def run_sa_lasso(cfg: ExperimentConfig, replica_seed: int) -> RegretTrace:
    """Single agent, greedy on a full-dimensional Lasso refitted every round."""
    return _run_single(cfg.replace(algo="sa_lasso"), replica_seed, thresholded=False)


def run_th_lasso_single(cfg: ExperimentConfig, replica_seed: int) -> RegretTrace:
    """Single agent: Lasso, threshold at lambda_t, Lasso refit on the survivors, greedy pick."""
    return _run_single(cfg.replace(algo="th_lasso_single"), replica_seed, thresholded=True)


RUNNERS = {"cctl": run_ctl, "dctl": run_ctl, "sa_lasso": run_sa_lasso, "th_lasso_single": run_th_lasso_single}


def run_replica(cfg: ExperimentConfig, replica_seed: int) -> RegretTrace:
    return RUNNERS[cfg.algo](cfg, replica_seed)


@dataclass
class Summary:
    t: np.ndarray
    mean_cum_regret: np.ndarray
    sd_cum_regret: np.ndarray
    comm_indices: np.ndarray
    n_replicas: int

    @property
    def final_mean(self) -> float:
        return float(self.mean_cum_regret[-1])

    @property
    def final_se(self) -> float:
        return float(self.sd_cum_regret[-1] / math.sqrt(self.n_replicas))


def aggregate_replicas(traces) -> Summary:
    """Mean and population standard deviation over replicas of the per-agent-averaged cumulative regret."""
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    shape = traces[0].instant.shape
    for tr in traces[1:]:
        if tr.instant.shape != shape:
            raise ValueError(f"trace shape {tr.instant.shape} differs from {shape}")
    per_replica = np.stack([tr.cumulative.mean(axis=0) for tr in traces])
    return Summary(
        t=np.arange(1, shape[1] + 1),
        mean_cum_regret=per_replica.mean(axis=0),
        sd_cum_regret=per_replica.std(axis=0, ddof=0),
        comm_indices=np.array([tr.comm.total_indices for tr in traces]),
        n_replicas=len(traces),
    )


def _fmt(x) -> str:
    return repr(float(x))


def emit_csv(summary: Summary, traces, out_dir, cfg: ExperimentConfig | None = None) -> list[Path]:
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "summary.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mean_cum_regret", "sd_cum_regret"])
            for t, m, s in zip(summary.t, summary.mean_cum_regret, summary.sd_cum_regret):
                w.writerow([int(t), _fmt(m), _fmt(s)])
        written.append(path)
        for r, tr in enumerate(traces):
            path = out / f"trace_{r}.csv"
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "agent", "inst_regret", "cum_regret"])
                for t in range(tr.T):
                    for i in range(tr.n_agents):
                        w.writerow([t + 1, i, _fmt(tr.instant[i, t]), _fmt(tr.cumulative[i, t])])
            written.append(path)
            path = out / f"comm_{r}.csv"
            tr.comm.to_csv(path)
            written.append(path)
        if cfg is not None:
            path = out / "config.echo"
            path.write_text(cfg.to_text(), encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise OSError(f"writing results to {out}: {exc}") from exc
    return written


def replica_seeds(cfg: ExperimentConfig) -> list[int]:
    return [cfg.seed_base + r for r in range(cfg.replicas)]


def tune_lambda0(cfg: ExperimentConfig) -> float:
    """Pick the grid value with the lowest mean final cumulative regret on held-out tuning seeds."""
    if not cfg.lambda0_grid:
        return cfg.lambda0
    seeds = [cfg.seed_base + cfg.tune_seed_offset + r for r in range(cfg.tune_replicas)]
    scores = {}
    for lam0 in cfg.lambda0_grid:
        trial = cfg.replace(lambda0=lam0)
        scores[lam0] = float(np.mean([run_replica(trial, s).cumulative[:, -1].mean() for s in seeds]))
        logger.info("%s tuning lambda0=%g -> final regret %.3f", cfg.algo, lam0, scores[lam0])
    best = min(cfg.lambda0_grid, key=lambda v: (scores[v], v))
    logger.info("%s: chose lambda0=%g", cfg.algo, best)
    return best


def run_experiment(cfg: ExperimentConfig) -> tuple[ExperimentConfig, list[RegretTrace], Summary]:
    """Tune (if a grid is given), run every replica and aggregate. Returns the resolved config."""
    resolved = cfg.replace(lambda0=tune_lambda0(cfg))
    if resolved.algo in SINGLE_AGENT:
        resolved = resolved.replace(N=1)
    traces = [run_replica(resolved, s) for s in replica_seeds(resolved)]
    return resolved, traces, aggregate_replicas(traces)
