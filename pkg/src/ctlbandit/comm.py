"""Sync schedule, network topologies, support aggregation and communication accounting."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np

__all__ = [
    "SERVER",
    "CommLog",
    "CommRound",
    "SyncMessage",
    "Topology",
    "as_support",
    "gen_random_connected_graph",
    "is_connected",
    "is_sync_step",
    "peer_exchange",
    "record_comm",
    "server_aggregate",
    "star_topology",
    "sync_grid",
]

SERVER = -1


def as_support(indices, d: int | None = None) -> np.ndarray:
    """Normalise to a sorted, duplicate-free ``intp`` array, checking bounds when ``d`` is given."""
    arr = np.unique(np.asarray(indices, dtype=np.intp))
    if arr.size and arr[0] < 0:
        raise ValueError(f"negative index {arr[0]} in support")
    if d is not None and arr.size and arr[-1] >= d:
        raise ValueError(f"index {arr[-1]} out of range for d={d}")
    return arr


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@lru_cache(maxsize=64)
def _grid(xi: float, T: int) -> tuple[int, ...]:
    out = []
    m = 1
    while True:
        t = _round_half_up(xi**m)
        if t > T:
            break
        if not out or out[-1] != t:
            out.append(t)
        m += 1
    return tuple(out)


def sync_grid(xi: float, T: int) -> tuple[int, ...]:
    """Rounds ``round(xi**m)``, ``m >= 1``, deduplicated and capped at ``T``."""
    if not xi > 1:
        raise ValueError(f"xi must exceed 1, got {xi}")
    return _grid(float(xi), int(T))


def is_sync_step(t: int, xi: float) -> bool:
    if t < 1:
        raise ValueError(f"rounds start at 1, got {t}")
    grid = sync_grid(xi, t)
    return bool(grid) and grid[-1] == t


def server_aggregate(supports) -> np.ndarray:
    if not supports:
        return np.empty(0, dtype=np.intp)
    return as_support(np.concatenate([np.asarray(s, dtype=np.intp) for s in supports]))


@dataclass(frozen=True)
class Topology:
    kind: str
    n_agents: int
    neighbors: tuple[tuple[int, ...], ...] = ()

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, nbrs in enumerate(self.neighbors) for j in nbrs if i < j]


def star_topology(N: int) -> Topology:
    return Topology(kind="star", n_agents=N)


def is_connected(topology: Topology) -> bool:
    n = topology.n_agents
    if n <= 1:
        return True
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in topology.neighbors[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


def gen_random_connected_graph(N: int, rng: np.random.Generator) -> Topology:
    """Random connected undirected graph with ``|E|`` uniform on ``{N-1, ..., 2N}``.

    The edge count is capped at ``N(N-1)/2``. A uniform random spanning tree
    (random Pruefer sequence) guarantees connectivity; the remaining edges are
    drawn uniformly among the absent pairs.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N == 1:
        return Topology(kind="peer_graph", n_agents=1, neighbors=((),))
    n_edges = int(rng.integers(N - 1, 2 * N + 1))
    n_edges = min(n_edges, N * (N - 1) // 2)

    edges = set()
    if N == 2:
        edges.add((0, 1))
    else:
        prufer = rng.integers(0, N, size=N - 2)
        degree = np.ones(N, dtype=int)
        for v in prufer:
            degree[v] += 1
        for v in prufer:
            leaf = int(np.flatnonzero(degree == 1)[0])
            edges.add((min(leaf, int(v)), max(leaf, int(v))))
            degree[leaf] -= 1
            degree[v] -= 1
        u, w = np.flatnonzero(degree == 1)
        edges.add((int(u), int(w)))

    extra = n_edges - len(edges)
    if extra > 0:
        absent = [(i, j) for i in range(N) for j in range(i + 1, N) if (i, j) not in edges]
        picks = rng.choice(len(absent), size=extra, replace=False)
        edges.update(absent[k] for k in picks)

    adj = [[] for _ in range(N)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    topo = Topology(kind="peer_graph", n_agents=N, neighbors=tuple(tuple(sorted(a)) for a in adj))
    assert is_connected(topo), "spanning tree construction produced a disconnected graph"
    return topo


def peer_exchange(topology: Topology, local_supports, rng: np.random.Generator) -> tuple[list[np.ndarray], list[int]]:
    """Each agent pulls one uniformly chosen neighbour's local estimate and takes the union.

    All pulls read the pre-exchange ``local_supports``, so the result does not
    depend on the order agents are processed in. Returns the new supports and
    the neighbour each agent pulled from. A single-agent graph has nobody to
    talk to and keeps its estimate.
    """
    if topology.kind != "peer_graph":
        raise ValueError(f"peer exchange needs a peer_graph topology, got {topology.kind!r}")
    if len(local_supports) != topology.n_agents:
        raise ValueError(f"{len(local_supports)} supports for {topology.n_agents} agents")
    if topology.n_agents == 1:
        return [as_support(local_supports[0])], [0]
    out, partners = [], []
    for i, nbrs in enumerate(topology.neighbors):
        if not nbrs:
            raise RuntimeError(f"agent {i} has no neighbours in a multi-agent graph")
        j = nbrs[int(rng.integers(len(nbrs)))]
        partners.append(j)
        out.append(server_aggregate([local_supports[i], local_supports[j]]))
    return out, partners


@dataclass(frozen=True)
class SyncMessage:
    """A support estimate in transit: dimension indices only."""

    sender: int
    round: int
    support: tuple[int, ...]

    def __post_init__(self):
        support = tuple(int(j) for j in self.support)
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValueError("support must be strictly increasing")
        object.__setattr__(self, "support", support)

    def to_dict(self) -> dict:
        return asdict(self)


class CommRound(NamedTuple):
    t: int
    mode: str
    messages: int
    indices_transmitted: int


@dataclass
class CommLog:
    rounds: list[CommRound] = field(default_factory=list)

    @property
    def total_indices(self) -> int:
        return sum(r.indices_transmitted for r in self.rounds)

    @property
    def total_messages(self) -> int:
        return sum(r.messages for r in self.rounds)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CommRound._fields)
            writer.writerows(self.rounds)

    @classmethod
    def from_csv(cls, path) -> CommLog:
        with open(Path(path), newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            return cls([CommRound(int(r["t"]), r["mode"], int(r["messages"]), int(r["indices_transmitted"])) for r in reader])


def record_comm(log: CommLog, t: int, mode: str, messages) -> CommLog:
    """Append one sync round's traffic.

    Call only at sync rounds. A sync with no messages (a lone peer agent) is
    still logged, with zero traffic, so entries line up with the schedule.
    """
    messages = list(messages)
    log.rounds.append(CommRound(t, mode, len(messages), sum(len(m.support) for m in messages)))
    return log
