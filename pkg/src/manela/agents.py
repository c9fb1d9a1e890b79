"""Multi-agent simulation: circumscribed views, degree-proportional
scheduling and the MANELA training loop."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .embedding import Embedding, LearningSchedule, apply_update_pair, init_embedding, learning_rate
from .graph import Network, bfs_distances
from .sampler import RatioVector, hop_counts, sample_targets

logger = logging.getLogger(__name__)

MAX_EMPTY_STREAK = 100_000


class AccessViolation(RuntimeError):
    """An agent tried to read topology outside its view."""


class AgentView:
    """The slice of the network agent ``owner`` may know: the subnetwork
    induced by all nodes within ``horizon`` hops of it.

    Reads through :meth:`neighbors` are logged to ``audit_log`` as
    ``(owner, node)`` pairs when a log list is attached.
    """

    def __init__(self, owner: int, horizon: int, distances: dict[int, int],
                 adjacency: dict[int, np.ndarray]):
        self.owner = owner
        self.horizon = horizon
        self.distances = distances
        self._adjacency = adjacency
        self.audit_log: list[tuple[int, int]] | None = None

    @property
    def visible_nodes(self) -> frozenset[int]:
        return frozenset(self.distances)

    @property
    def visible_adjacency(self) -> dict[int, list[int]]:
        return {u: nbrs.tolist() for u, nbrs in self._adjacency.items()}

    def edges(self) -> set[tuple[int, int]]:
        return {(min(u, x), max(u, x)) for u, nbrs in self._adjacency.items() for x in nbrs.tolist()}

    def neighbors(self, u: int) -> np.ndarray:
        nbrs = self._adjacency.get(u)
        if nbrs is None:
            raise AccessViolation(f"agent {self.owner} cannot see node {u}")
        if self.audit_log is not None:
            self.audit_log.append((self.owner, u))
            self.audit_log.extend((self.owner, int(x)) for x in nbrs)
        return nbrs

    def __contains__(self, u):
        return u in self.distances


def build_view(net: Network, v: int, s: int) -> AgentView:
    """Depth-``s`` BFS from ``v`` and the induced adjacency on what it reaches."""
    if s < 1:
        raise ValueError("horizon s must be >= 1")
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if dist[u] == s:
            continue
        for x in net.neighbors(u).tolist():
            if x not in dist:
                dist[x] = dist[u] + 1
                queue.append(x)
    visible = np.array(sorted(dist), dtype=np.int64)
    adjacency = {}
    for u in visible.tolist():
        nbrs = net.neighbors(u)
        if dist[u] < s:
            adjacency[u] = nbrs  # every neighbor of an interior node is visible
        else:
            adjacency[u] = nbrs[np.isin(nbrs, visible, assume_unique=True)]
    return AgentView(v, s, dist, adjacency)


def schedule_next(net: Network, rng, cum_deg: np.ndarray | None = None) -> int:
    """Pick the acting agent with probability ``d(v) / sum_u d(u)``."""
    if cum_deg is None:
        cum_deg = np.cumsum(net.degrees)
    if len(cum_deg) == 0 or cum_deg[-1] == 0:
        raise ValueError("cannot schedule on an edgeless network")
    return int(np.searchsorted(cum_deg, rng.random() * cum_deg[-1], side="right"))


@dataclass
class TrainConfig:
    m: int = 128
    w: int = 10
    r: RatioVector = field(default_factory=lambda: RatioVector((0.5, 0.5)))
    kappa: int = 5
    alpha0: float = 0.025
    floor_fraction: float = 1e-4
    budget_pairs: int = 1
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not isinstance(self.r, RatioVector):
            self.r = RatioVector(tuple(self.r))
        if self.budget_pairs < 0:
            raise ValueError("budget_pairs must be >= 0")
        if min(self.m, self.w) < 1 or self.kappa < 0:
            raise ValueError("need m >= 1, w >= 1, kappa >= 0")
        if hop_counts(self.w, self.r).sum() == 0:
            raise ValueError("ratio vector rounds to zero walks per iteration")

    @property
    def s(self) -> int:
        return len(self.r)

    @property
    def schedule(self) -> LearningSchedule:
        return LearningSchedule(self.alpha0, self.floor_fraction, max(self.budget_pairs, 1))

    def as_dict(self) -> dict:
        return {
            "m": self.m, "w": self.w, "r": list(self.r.r), "s": self.s, "kappa": self.kappa,
            "alpha0": self.alpha0, "floor_fraction": self.floor_fraction,
            "budget_pairs": self.budget_pairs, "seed": self.seed, "threads": self.threads,
        }


@dataclass
class RunStats:
    source_counts: np.ndarray
    total_pairs: int
    iterations: int = 0
    empty_iterations: int = 0
    audit: np.ndarray | None = None  # audit[accessor, accessed] -> bool

    def audit_pairs(self) -> np.ndarray:
        if self.audit is None:
            return np.zeros((0, 2), dtype=np.int64)
        return np.argwhere(self.audit)


def _seed_streams(seed: int) -> tuple[np.random.Generator, int]:
    """Split a user seed into the init generator and the training-loop seed."""
    ss = np.random.SeedSequence(seed)
    init_ss, loop_ss = ss.spawn(2)
    loop_seed = int(loop_ss.generate_state(1, dtype=np.uint32)[0])
    return np.random.default_rng(init_ss), loop_seed


def run_manela(net: Network, cfg: TrainConfig, audit: bool = False,
               engine: str = "fast") -> tuple[Embedding, RunStats]:
    """Train node vectors with MANELA until ``cfg.budget_pairs`` update pairs ran.

    ``engine="fast"`` runs the compiled loop; ``"reference"`` composes the
    Python-level operations (views, sampling, update pairs) and is meant for
    small graphs.  Both consume the same random stream and give identical
    results.  ``cfg.threads > 1`` switches to the unsynchronised parallel
    loop, which is not reproducible.
    """
    if net.edge_count == 0:
        raise ValueError("network has no edges")
    init_rng, loop_seed = _seed_streams(cfg.seed)
    emb = init_embedding(net.node_count, cfg.m, init_rng, net.node_names)
    counts = np.zeros(net.node_count, dtype=np.int64)
    audit_mat = np.zeros((net.node_count, net.node_count) if audit else (1, 1), dtype=np.bool_)
    if cfg.budget_pairs == 0:
        return emb, RunStats(counts, 0, audit=audit_mat if audit else None)

    if engine == "reference":
        stats = _run_reference(net, cfg, emb, counts, audit_mat if audit else None, loop_seed)
    elif engine == "fast" and cfg.threads > 1:
        stats = _run_parallel(net, cfg, emb, counts, audit_mat, audit, loop_seed)
    elif engine == "fast":
        done, iters, empty, stalled = _kernels.manela_loop(
            net.indptr, net.indices, np.cumsum(net.degrees), emb.vectors, counts,
            hop_counts(cfg.w, cfg.r), cfg.kappa, cfg.alpha0, cfg.floor_fraction,
            cfg.budget_pairs, 0, cfg.budget_pairs, loop_seed, audit_mat, audit, MAX_EMPTY_STREAK)
        if stalled:
            raise RuntimeError(f"sampling stalled after {done} pairs: {MAX_EMPTY_STREAK} empty iterations in a row")
        stats = RunStats(counts, int(done), int(iters), int(empty), audit_mat if audit else None)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if stats.empty_iterations:
        logger.info("%d iteration(s) produced no targets", stats.empty_iterations)
    return emb, stats


def _run_reference(net, cfg, emb, counts, audit_mat, loop_seed) -> RunStats:
    rng = np.random.RandomState(loop_seed)
    cum_deg = np.cumsum(net.degrees)
    views: dict[int, AgentView] = {}
    sched = cfg.schedule
    done = iters = empty = streak = 0
    while done < cfg.budget_pairs:
        src = schedule_next(net, rng, cum_deg)
        iters += 1
        view = views.get(src)
        if view is None:
            view = views[src] = build_view(net, src, cfg.s)
        log: list[tuple[int, int]] = []
        view.audit_log = log if audit_mat is not None else None
        targets = sample_targets(view, src, cfg.w, cfg.r, rng)
        view.audit_log = None
        for a, b in log:
            audit_mat[a, b] = True
        if not targets:
            empty += 1
            streak += 1
            if streak >= MAX_EMPTY_STREAK:
                raise RuntimeError("sampling stalled")
            continue
        streak = 0
        for tgt in targets:
            if done >= cfg.budget_pairs:
                break
            apply_update_pair(emb, src, tgt, cfg.kappa, learning_rate(sched, done), rng)
            counts[src] += 1
            done += 1
    return RunStats(counts, done, iters, empty, audit_mat)


def _run_parallel(net, cfg, emb, counts, audit_mat, audit, loop_seed) -> RunStats:
    t = cfg.threads
    deg = net.degrees
    nodes, offsets, cums, budgets = [], [0], [], []
    total_deg = deg.sum()
    for k in range(t):
        shard = np.arange(k, net.node_count, t)
        nodes.append(shard)
        cums.append(np.cumsum(deg[shard]))
        offsets.append(offsets[-1] + len(shard))
        budgets.append(int(round(cfg.budget_pairs * deg[shard].sum() / total_deg)))
    budgets[-1] += cfg.budget_pairs - sum(budgets)
    seeds = np.random.SeedSequence(loop_seed).generate_state(t, dtype=np.uint32).astype(np.int64)
    done = _kernels.manela_parallel(
        net.indptr, net.indices, np.concatenate(cums), np.concatenate(nodes),
        np.array(offsets, dtype=np.int64), np.array(budgets, dtype=np.int64), emb.vectors, counts,
        hop_counts(cfg.w, cfg.r), cfg.kappa, cfg.alpha0, cfg.floor_fraction, seeds,
        audit_mat, audit, MAX_EMPTY_STREAK)
    return RunStats(counts, int(done.sum()), audit=audit_mat if audit else None)


def audit_records(stats: RunStats, net: Network) -> list[tuple[int, int, int]]:
    """``(accessor, accessed, distance)`` for every audited access; distance -1 if unreachable."""
    pairs = stats.audit_pairs()
    out = []
    for accessor in np.unique(pairs[:, 0]) if len(pairs) else []:
        dist = bfs_distances(net, int(accessor))
        for accessed in pairs[pairs[:, 0] == accessor, 1]:
            out.append((int(accessor), int(accessed), int(dist[accessed])))
    return out


def audit_violations(stats: RunStats, net: Network, s: int) -> list[tuple[int, int, int]]:
    return [rec for rec in audit_records(stats, net) if rec[2] < 0 or rec[2] > s]


def write_run_stats(stats: RunStats, net: Network, path: str | Path, header: str = "") -> None:
    """Tab-separated ``node degree source_updates`` table."""
    lines = [header] if header else []
    lines.append("node\tdegree\tsource_updates\n")
    for name, d, c in zip(net.node_names, net.degrees.tolist(), stats.source_counts.tolist()):
        lines.append(f"{name}\t{d}\t{c}\n")
    Path(path).write_text("".join(lines))


def write_audit_log(stats: RunStats, net: Network, path: str | Path, header: str = "") -> None:
    lines = [header] if header else []
    lines.append("accessor\taccessed\tdistance\n")
    names = net.node_names
    for a, b, d in audit_records(stats, net):
        lines.append(f"{names[a]}\t{names[b]}\t{d}\n")
    Path(path).write_text("".join(lines))
