"""Embedding table, the skip-gram update rules, learning-rate schedule and
a Monte-Carlo estimate of the sampling objective."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .graph import Network
from .sampler import RatioVector, hop_counts

logger = logging.getLogger(__name__)


@dataclass
class Embedding:
    """``vectors[i]`` is the m-dimensional representation of node ``i``."""

    vectors: np.ndarray
    node_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("embedding table must be 2-D")
        if not self.node_names:
            self.node_names = tuple(str(i) for i in range(self.node_count))

    @property
    def node_count(self) -> int:
        return self.vectors.shape[0]

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, v):
        return self.vectors[v]

    def copy(self) -> "Embedding":
        return Embedding(self.vectors.copy(), self.node_names)


@dataclass(frozen=True)
class LearningSchedule:
    alpha0: float = 0.025
    floor_fraction: float = 1e-4
    budget: int = 1

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if not 0 < self.floor_fraction <= 1:
            raise ValueError("floor_fraction must lie in (0, 1]")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


def sigmoid(x):
    """Logistic function without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def log_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))
    return out if out.ndim else float(out)


def init_embedding(node_count: int, m: int, rng: np.random.Generator,
                   node_names: Sequence[str] = ()) -> Embedding:
    """Entries uniform on ``[-0.5/m, 0.5/m]``."""
    if node_count < 1 or m < 1:
        raise ValueError("node_count and m must be >= 1")
    return Embedding(rng.uniform(-0.5 / m, 0.5 / m, size=(node_count, m)), tuple(node_names))


def _check_dims(phi_v, phi_t):
    phi_v = np.asarray(phi_v, dtype=np.float64)
    phi_t = np.asarray(phi_t, dtype=np.float64)
    if phi_v.shape != phi_t.shape:
        raise ValueError(f"dimension mismatch: {phi_v.shape} vs {phi_t.shape}")
    return phi_v, phi_t


def positive_update(phi_v, phi_t, alpha: float) -> np.ndarray:
    """Gradient-ascent step on ``log sigmoid(phi_v . phi_t)`` with respect to ``phi_v``."""
    phi_v, phi_t = _check_dims(phi_v, phi_t)
    return phi_v + alpha * (1.0 - sigmoid(phi_v @ phi_t)) * phi_t


def negative_update(phi_v, phi_t, alpha: float) -> np.ndarray:
    """Gradient-ascent step on ``log sigmoid(-phi_v . phi_t)``."""
    phi_v, phi_t = _check_dims(phi_v, phi_t)
    return phi_v - alpha * sigmoid(phi_v @ phi_t) * phi_t


def draw_negatives(node_count: int, kappa: int, rng) -> np.ndarray:
    return np.array([int(rng.random() * node_count) for _ in range(kappa)], dtype=np.int64)


def apply_update_pair(emb: Embedding, v_src: int, v_tgt: int, kappa: int, alpha: float, rng) -> np.ndarray:
    """One update pair in place on row ``v_src``; returns the negatives drawn.

    Negatives are uniform over all nodes (they may include ``v_src`` or its
    neighbors).  Only ``emb.vectors[v_src]`` changes.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    negatives = draw_negatives(emb.node_count, kappa, rng)
    _kernels.update_row(emb.vectors, v_src, v_tgt, negatives, alpha)
    return negatives


def learning_rate(sched: LearningSchedule, pairs_done: int) -> float:
    """Linear decay from ``alpha0`` to ``alpha0 * floor_fraction`` over the budget."""
    return sched.alpha0 * max(sched.floor_fraction, 1.0 - pairs_done / sched.budget)


def objective_estimate(emb: Embedding, net: Network, w: int, r: RatioVector, kappa: int,
                       trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo estimate of the negative-sampling objective summed over all nodes.

    Each node contributes ``2w`` positive terms ``log sigmoid(phi_v . phi_t)``
    with ``t`` drawn from the hop-weighted walk mixture (no source removal)
    and ``2w * kappa`` negative terms with uniform negatives.  Isolated nodes
    contribute only their negative terms.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = net.node_count
    counts = hop_counts(w, r)
    hop_p = counts / counts.sum()
    deg = net.degrees
    active = np.flatnonzero(deg > 0)
    n_pos = 2 * w
    total = 0.0
    for _ in range(trials):
        src = np.repeat(active, n_pos)
        hops = rng.choice(len(hop_p), size=len(src), p=hop_p) + 1
        cur = src.copy()
        for step in range(1, len(hop_p) + 1):
            moving = hops >= step
            c = cur[moving]
            pick = (rng.random(len(c)) * deg[c]).astype(np.int64)
            cur[moving] = net.indices[net.indptr[c] + pick]
        pos = np.einsum("ij,ij->i", emb.vectors[src], emb.vectors[cur])
        neg_src = np.repeat(np.arange(n), n_pos * kappa)
        neg = rng.integers(0, n, size=len(neg_src))
        negd = np.einsum("ij,ij->i", emb.vectors[neg_src], emb.vectors[neg])
        total += log_sigmoid(pos).sum() + log_sigmoid(-negd).sum()
    return float(total / trials)


def save_embedding(emb: Embedding, path: str | Path) -> None:
    """Word-vector text format: ``node_count m`` then ``token v_1 ... v_m`` per node."""
    lines = [f"{emb.node_count} {emb.m}\n"]
    for name, row in zip(emb.node_names, emb.vectors):
        lines.append(name + " " + " ".join(repr(float(x)) for x in row) + "\n")
    Path(path).write_text("".join(lines))


def load_embedding(path: str | Path) -> Embedding:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad header, expected 'node_count m'")
        n, m = int(header[0]), int(header[1])
        names = []
        vectors = np.empty((n, m))
        for i in range(n):
            parts = fh.readline().split()
            if len(parts) != m + 1:
                raise ValueError(f"{path}: line {i + 2} has {len(parts) - 1} values, expected {m}")
            names.append(parts[0])
            vectors[i] = [float(x) for x in parts[1:]]
    return Embedding(vectors, tuple(names))


def align_embedding(emb: Embedding, node_names: Sequence[str]) -> Embedding:
    """Reorder rows to match ``node_names``; missing nodes get zero vectors."""
    index = {name: i for i, name in enumerate(emb.node_names)}
    out = np.zeros((len(node_names), emb.m))
    missing = 0
    for j, name in enumerate(node_names):
        i = index.get(name)
        if i is None:
            missing += 1
        else:
            out[j] = emb.vectors[i]
    if missing:
        logger.warning("%d node(s) have no vector; using zeros", missing)
    return Embedding(out, tuple(node_names))
