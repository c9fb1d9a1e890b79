"""Target-node sampling by short uniform walks, with exact distribution oracles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Network, bfs_distances


@dataclass(frozen=True)
class RatioVector:
    """Non-negative weights over hop distances ``1..s`` summing to one."""

    r: tuple[float, ...]

    def __post_init__(self):
        r = tuple(float(x) for x in self.r)
        object.__setattr__(self, "r", r)
        if len(r) < 1:
            raise ValueError("ratio vector needs at least one component")
        if any(x < 0 for x in r):
            raise ValueError("ratio components must be non-negative")
        if abs(sum(r) - 1.0) > 1e-9:
            raise ValueError(f"ratio components sum to {sum(r)}, expected 1")

    @classmethod
    def from_r1(cls, r1: float) -> "RatioVector":
        """Two-hop ratio ``(r1, 1 - r1)``."""
        return cls((r1, 1.0 - r1))

    @property
    def s(self) -> int:
        return len(self.r)

    def __len__(self):
        return len(self.r)

    def __getitem__(self, k):
        return self.r[k]


def hop_counts(w: int, r: RatioVector) -> np.ndarray:
    """Walks per hop length: ``round(2w * r_k)``, rounding half to even."""
    return np.array([round(2 * w * rk) for rk in r.r], dtype=np.int64)


def sample_targets(view, v_src: int, w: int, r: RatioVector, rng, drop_source: bool = True) -> list[int]:
    """Draw one iteration's targets for ``v_src``.

    For each hop length ``k`` runs ``round(2w * r_k)`` independent uniform
    walks of ``k`` steps from ``v_src`` and collects the endpoints.  Every
    adjacency read goes through ``view.neighbors``, so walks cannot leave the
    caller's view.  Endpoints equal to ``v_src`` are removed afterwards unless
    ``drop_source`` is false.  An isolated source yields an empty list.

    ``rng`` only needs a ``random()`` method; neighbors are picked as
    ``floor(u * degree)``.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if len(view.neighbors(v_src)) == 0:
        return []
    out = []
    for k, count in enumerate(hop_counts(w, r), start=1):
        for _ in range(count):
            cur = v_src
            for _ in range(k):
                nbrs = view.neighbors(cur)
                cur = int(nbrs[int(rng.random() * len(nbrs))])
            out.append(cur)
    if drop_source:
        out = [v for v in out if v != v_src]
    return out


def walk_endpoint_distribution(net: Network, v_src: int, k: int) -> dict[int, float]:
    """Exact endpoint law of a ``k``-step uniform walk from ``v_src``.

    Propagates the step distribution ``k`` times through the transition
    matrix; suitable for small graphs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    deg = net.degrees.astype(float)
    if deg[v_src] == 0:
        raise ValueError(f"node {v_src} is isolated")
    p = np.zeros(net.node_count)
    p[v_src] = 1.0
    for _ in range(k):
        share = np.divide(p, deg, out=np.zeros_like(p), where=deg > 0)
        p = np.bincount(net.indices, weights=np.repeat(share, net.degrees), minlength=net.node_count)
    return {int(v): float(p[v]) for v in np.flatnonzero(p)}


def mixed_walk_distribution(net: Network, v_src: int, w: int, r: RatioVector,
                            drop_source: bool = False) -> dict[int, float]:
    """Law of a single target drawn by ``sample_targets`` before (or after) source removal.

    Hop lengths are weighted by their walk counts ``round(2w * r_k)``.  With
    ``drop_source`` the mass on ``v_src`` is removed and the rest renormalised.
    """
    counts = hop_counts(w, r)
    total = counts.sum()
    mix: dict[int, float] = {}
    for k, c in enumerate(counts, start=1):
        if c == 0:
            continue
        for v, p in walk_endpoint_distribution(net, v_src, k).items():
            mix[v] = mix.get(v, 0.0) + p * c / total
    if drop_source:
        mix.pop(v_src, None)
        z = sum(mix.values())
        mix = {v: p / z for v, p in mix.items()} if z > 0 else {}
    return mix


def exact_m_distribution(net: Network, v_src: int, s: int, r: RatioVector) -> dict[int, float]:
    """Distance-shell target law: mass ``r_k`` spread evenly over nodes at distance ``k``.

    Empty shells lose their mass and the remainder is renormalised.
    """
    if len(r) != s:
        raise ValueError("ratio vector length must equal s")
    dist = bfs_distances(net, v_src, max_depth=s)
    out: dict[int, float] = {}
    for k in range(1, s + 1):
        shell = np.flatnonzero(dist == k)
        if len(shell) and r[k - 1] > 0:
            for v in shell:
                out[int(v)] = r[k - 1] / len(shell)
    z = sum(out.values())
    if z == 0:
        raise ValueError(f"no reachable node within distance {s} of {v_src}")
    return {v: p / z for v, p in out.items()}


def total_variation(p: dict[int, float], q: dict[int, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical_distribution(samples: Sequence[int]) -> dict[int, float]:
    vals, counts = np.unique(np.asarray(samples), return_counts=True)
    n = counts.sum()
    return {int(v): c / n for v, c in zip(vals, counts)}
