"""DeepWalk with negative sampling and the Relational Neighbors classifier."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .agents import RunStats, _seed_streams
from .embedding import Embedding, LearningSchedule, apply_update_pair, init_embedding, learning_rate
from .graph import LabelSet, Network

logger = logging.getLogger(__name__)


@dataclass
class WalkConfig:
    gamma: int = 10
    ell: int = 80
    w: int = 10
    m: int = 128
    kappa: int = 5
    alpha0: float = 0.025
    floor_fraction: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if min(self.gamma, self.ell, self.w, self.m) < 1 or self.kappa < 0:
            raise ValueError("gamma, ell, w, m must be >= 1 and kappa >= 0")
        if self.ell <= 2 * self.w:
            logger.warning("walk length %d <= 2w = %d; boundary windows dominate", self.ell, 2 * self.w)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("gamma", "ell", "w", "m", "kappa", "alpha0", "floor_fraction", "seed")}


def random_walk(net: Network, start: int, ell: int, rng) -> list[int]:
    """Uniform walk of ``ell`` nodes; an isolated start gives ``[start]``."""
    path = [start]
    cur = start
    for _ in range(ell - 1):
        nbrs = net.neighbors(cur)
        if len(nbrs) == 0:
            logger.debug("walk from isolated node %d truncated", start)
            break
        cur = int(nbrs[int(rng.random() * len(nbrs))])
        path.append(cur)
    return path


def window_pairs(length: int, w: int) -> int:
    """Count (center, context) pairs in a path by direct enumeration."""
    return sum(1 for i in range(length) for j in range(max(0, i - w), min(length, i + w + 1)) if j != i)


def update_pairs_per_path(ell: int, w: int) -> int:
    """Update pairs contributed by one walk path: ``w(2*ell - w - 1)`` when ``ell >= 2w``."""
    if ell >= 2 * w:
        return w * (2 * ell - w - 1)
    return window_pairs(ell, w)


def deepwalk_budget(net: Network, cfg: WalkConfig) -> int:
    """Total update pairs DeepWalk performs on ``net`` (isolated starts give none)."""
    walkers = int(np.count_nonzero(net.degrees))
    return cfg.gamma * walkers * update_pairs_per_path(cfg.ell, cfg.w)


def run_deepwalk(net: Network, cfg: WalkConfig, engine: str = "fast") -> tuple[Embedding, RunStats]:
    """``gamma`` rounds over a shuffled node order; every window pair of every
    walk is one update pair with the center as source."""
    init_rng, loop_seed = _seed_streams(cfg.seed)
    emb = init_embedding(net.node_count, cfg.m, init_rng, net.node_names)
    counts = np.zeros(net.node_count, dtype=np.int64)
    budget = deepwalk_budget(net, cfg)
    if budget == 0:
        return emb, RunStats(counts, 0)
    if engine == "fast":
        done, short = _kernels.deepwalk_loop(
            net.indptr, net.indices, emb.vectors, counts, cfg.gamma, cfg.ell, cfg.w,
            cfg.kappa, cfg.alpha0, cfg.floor_fraction, budget, loop_seed)
    elif engine == "reference":
        done, short = _deepwalk_reference(net, cfg, emb, counts, budget, loop_seed)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if short:
        logger.info("%d walk(s) started at isolated nodes", short)
    return emb, RunStats(counts, int(done), iterations=cfg.gamma * net.node_count)


def _deepwalk_reference(net, cfg, emb, counts, budget, loop_seed):
    rng = np.random.RandomState(loop_seed)
    sched = LearningSchedule(cfg.alpha0, cfg.floor_fraction, budget)
    order = list(range(net.node_count))
    done = short = 0
    for _ in range(cfg.gamma):
        for i in range(len(order) - 1, 0, -1):
            j = int(rng.random() * (i + 1))
            order[i], order[j] = order[j], order[i]
        for start in order:
            path = random_walk(net, start, cfg.ell, rng)
            if len(path) < cfg.ell:
                short += 1
            for i, center in enumerate(path):
                for j in range(max(0, i - cfg.w), min(len(path), i + cfg.w + 1)):
                    if j == i:
                        continue
                    apply_update_pair(emb, center, path[j], cfg.kappa, learning_rate(sched, done), rng)
                    counts[center] += 1
                    done += 1
    return done, short


def run_rn(net: Network, seed_labels: LabelSet, rng=None, k_per_node=None,
           max_rounds: int = 10_000) -> LabelSet:
    """Relational Neighbors: unlabeled nodes repeatedly take the most frequent
    labels among their labeled neighbors.

    Nodes are visited in id order and a label assigned during a pass is seen
    by later nodes of the same pass.  Node ``v`` receives the top
    ``k_per_node[v]`` labels of its neighbors' pooled label bag (default 1);
    frequency ties go to the lower label id.  Seed labels never change.
    Stops when a pass assigns nothing, so nodes cut off from every seed stay
    unlabeled.  ``rng`` is accepted for interface symmetry; the procedure is
    deterministic.
    """
    labels = [frozenset(s) for s in seed_labels.labels]
    for _ in range(max_rounds):
        changed = False
        for v in range(net.node_count):
            if labels[v]:
                continue
            bag: Counter = Counter()
            for u in net.neighbors(v).tolist():
                bag.update(labels[u])
            if not bag:
                continue
            k = 1 if k_per_node is None else max(1, int(k_per_node[v]))
            ranked = sorted(bag.items(), key=lambda kv: (-kv[1], kv[0]))
            labels[v] = frozenset(lab for lab, _ in ranked[:k])
            changed = True
        if not changed:
            break
    unlabeled = sum(1 for s in labels if not s)
    if unlabeled:
        logger.info("RN left %d node(s) unlabeled", unlabeled)
    return LabelSet(labels, seed_labels.label_count, seed_labels.label_names)
