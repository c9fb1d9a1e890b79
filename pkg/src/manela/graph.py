"""Undirected graph model, edge/label file ingestion and synthetic generators."""

from __future__ import annotations

import io
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

logger = logging.getLogger(__name__)


class GraphParseError(ValueError):
    """Raised for a malformed edge or label file line."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Network:
    """Immutable undirected graph in CSR form.

    ``indices[indptr[v]:indptr[v + 1]]`` holds the ascending neighbor ids of
    ``v``.  ``node_names[i]`` is the external token of dense id ``i``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    node_names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.node_names:
            object.__setattr__(self, "node_names", tuple(str(i) for i in range(self.node_count)))
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.node_count)]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def edges(self) -> np.ndarray:
        """All edges as an ``(E, 2)`` array with ``u < v``, lexicographically sorted."""
        src = np.repeat(np.arange(self.node_count), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]]).astype(np.int64)

    def index_of(self, name: str) -> int:
        return self._name_index[name]

    @property
    def _name_index(self) -> dict[str, int]:
        cache = self.__dict__.get("_name_cache")
        if cache is None:
            cache = {name: i for i, name in enumerate(self.node_names)}
            object.__setattr__(self, "_name_cache", cache)
        return cache

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Sequence[int]] | np.ndarray,
                   node_names: Sequence[str] = ()) -> "Network":
        """Build a network from integer pairs; duplicates and orientation are collapsed."""
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(arr) and (arr.min() < 0 or arr.max() >= node_count):
            raise ValueError("edge endpoint out of range")
        arr = arr[arr[:, 0] != arr[:, 1]]
        both = np.concatenate([arr, arr[:, ::-1]])
        both = np.unique(both, axis=0) if len(both) else both.reshape(0, 2)
        counts = np.bincount(both[:, 0], minlength=node_count) if len(both) else np.zeros(node_count, int)
        indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(indptr, both[:, 1].astype(np.int64).copy(), tuple(node_names))

    @classmethod
    def from_adjacency(cls, adjacency: Sequence[Iterable[int]]) -> "Network":
        pairs = [(u, v) for u, nbrs in enumerate(adjacency) for v in nbrs]
        return cls.from_edges(len(adjacency), pairs)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and self.node_names == other.node_names)

    __hash__ = None


@dataclass
class LabelSet:
    """Per-node multilabel assignment over label ids ``[0, label_count)``."""

    labels: list[frozenset[int]]
    label_count: int
    label_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.labels = [frozenset(s) for s in self.labels]
        if not self.label_names:
            self.label_names = tuple(str(i) for i in range(self.label_count))
        for s in self.labels:
            if any(lab < 0 or lab >= self.label_count for lab in s):
                raise ValueError("label id out of range")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, v):
        return self.labels[v]

    def to_matrix(self) -> np.ndarray:
        mat = np.zeros((len(self.labels), self.label_count), dtype=bool)
        for v, s in enumerate(self.labels):
            mat[v, list(s)] = True
        return mat

    @classmethod
    def from_matrix(cls, mat: np.ndarray, label_names: Sequence[str] = ()) -> "LabelSet":
        mat = np.asarray(mat, dtype=bool)
        return cls([frozenset(np.flatnonzero(row).tolist()) for row in mat], mat.shape[1], tuple(label_names))

    def subset(self, nodes: Sequence[int]) -> "LabelSet":
        return LabelSet([self.labels[v] for v in nodes], self.label_count, self.label_names)


@dataclass
class EdgeSet:
    """Deduplicated unordered node pairs stored as ``(u, v)`` with ``u < v``."""

    pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        arr = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ValueError("self-pair in edge set")
        arr = np.sort(arr, axis=1)
        self.pairs = np.unique(arr, axis=0) if len(arr) else arr

    def __len__(self):
        return len(self.pairs)

    def __contains__(self, edge) -> bool:
        u, v = sorted(edge)
        return (u, v) in self._set

    def __iter__(self):
        return iter(map(tuple, self.pairs.tolist()))

    @property
    def _set(self) -> set[tuple[int, int]]:
        cache = self.__dict__.get("_cache")
        if cache is None:
            cache = set(map(tuple, self.pairs.tolist()))
            self.__dict__["_cache"] = cache
        return cache

    def keys(self, node_count: int) -> np.ndarray:
        """Scalar key ``u * node_count + v`` per pair, for vectorised membership tests."""
        return self.pairs[:, 0] * node_count + self.pairs[:, 1]


# -- ingestion ---------------------------------------------------------------

def _lines(source) -> Iterable[str]:
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                     and Path(source).is_file()):
        with open(source) as fh:
            yield from fh
    elif isinstance(source, str):
        yield from io.StringIO(source)
    else:
        yield from source


def parse_edge_list(source: str | Path | TextIO) -> Network:
    """Parse a whitespace-separated edge list.

    Tokens map to dense ids in first-appearance order.  Lines starting with
    ``#`` and blank lines are ignored; self-loops are dropped and counted.
    """
    names: dict[str, int] = {}
    pairs = []
    self_loops = 0
    for line_no, line in enumerate(_lines(source), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) != 2:
            raise GraphParseError(f"expected 2 tokens, got {len(tokens)}", line_no)
        a = names.setdefault(tokens[0], len(names))
        b = names.setdefault(tokens[1], len(names))
        if a == b:
            self_loops += 1
            continue
        pairs.append((a, b))
    if self_loops:
        logger.warning("dropped %d self-loop line(s)", self_loops)
    net = Network.from_edges(len(names), pairs, tuple(names))
    duplicates = len(pairs) - net.edge_count
    if duplicates:
        logger.warning("collapsed %d duplicate edge line(s)", duplicates)
    return net


def serialize_edge_list(net: Network, out: TextIO | None = None) -> str:
    """Write each edge once as ``name_u name_v``; returns the text."""
    names = net.node_names
    lines = [f"{names[u]} {names[v]}\n" for u, v in net.edges().tolist()]
    text = "".join(lines)
    if out is not None:
        out.write(text)
    return text


def parse_labels(source, nodes: Network | Sequence[str] | None = None) -> LabelSet:
    """Parse a label file: ``node_token label_token ...`` per line.

    With ``nodes`` (a network or a sequence of node tokens) given, node
    tokens are resolved against it and nodes missing from the file get an
    empty label set.  Label tokens map to
    dense ids in first-appearance order, unless every token is an integer,
    in which case numeric order is used.
    """
    rows: list[tuple[str, list[str]]] = []
    for line_no, line in enumerate(_lines(source), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        rows.append((tokens[0], tokens[1:]))
    all_tokens = list(dict.fromkeys(t for _, toks in rows for t in toks))
    if all_tokens and all(t.lstrip("-").isdigit() for t in all_tokens):
        all_tokens.sort(key=int)
    label_index = {t: i for i, t in enumerate(all_tokens)}

    if nodes is None:
        names: dict[str, int] = {}
        for node, _ in rows:
            names.setdefault(node, len(names))
    elif isinstance(nodes, Network):
        names = nodes._name_index
    else:
        names = {name: i for i, name in enumerate(nodes)}
    n = len(names)
    sets: list[set[int]] = [set() for _ in range(n)]
    for node, toks in rows:
        if node not in names:
            logger.warning("label for unknown node %r ignored", node)
            continue
        sets[names[node]].update(label_index[t] for t in toks)
    return LabelSet([frozenset(s) for s in sets], len(all_tokens), tuple(all_tokens))


def serialize_labels(labels: LabelSet, node_names: Sequence[str], out: TextIO | None = None) -> str:
    lines = []
    for v, s in enumerate(labels.labels):
        if s:
            toks = " ".join(labels.label_names[lab] for lab in sorted(s))
            lines.append(f"{node_names[v]} {toks}\n")
    text = "".join(lines)
    if out is not None:
        out.write(text)
    return text


# -- structure ---------------------------------------------------------------

def degree(net: Network, v: int) -> int:
    if not 0 <= v < net.node_count:
        raise IndexError(f"node {v} out of range [0, {net.node_count})")
    return int(net.indptr[v + 1] - net.indptr[v])


def bfs_distances(net: Network, source: int, max_depth: int | None = None) -> np.ndarray:
    """Hop distances from ``source``; unreachable (or beyond ``max_depth``) is -1."""
    dist = np.full(net.node_count, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if max_depth is not None and dist[u] >= max_depth:
            continue
        for x in net.neighbors(u):
            if dist[x] < 0:
                dist[x] = dist[u] + 1
                queue.append(x)
    return dist


def connected_components(net: Network) -> np.ndarray:
    """Component id per node, numbered in order of lowest member id."""
    comp = np.full(net.node_count, -1, dtype=np.int64)
    current = 0
    for start in range(net.node_count):
        if comp[start] >= 0:
            continue
        comp[start] = current
        stack = [start]
        while stack:
            u = stack.pop()
            for x in net.neighbors(u):
                if comp[x] < 0:
                    comp[x] = current
                    stack.append(x)
        current += 1
    return comp


def induced_subnetwork(net: Network, nodes: Sequence[int]) -> tuple[Network, dict[int, int]]:
    """Subnetwork on ``nodes`` (ascending) with ids re-densified; returns old->new map."""
    nodes = np.unique(np.asarray(nodes, dtype=np.int64))
    remap = np.full(net.node_count, -1, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    edges = net.edges()
    keep = (remap[edges[:, 0]] >= 0) & (remap[edges[:, 1]] >= 0)
    sub_edges = remap[edges[keep]]
    names = tuple(net.node_names[v] for v in nodes.tolist())
    sub = Network.from_edges(len(nodes), sub_edges, names)
    return sub, {int(old): i for i, old in enumerate(nodes.tolist())}


def largest_connected_component(net: Network) -> tuple[Network, dict[int, int]]:
    """Induced subnetwork on the largest component (ties: lowest-id component)."""
    if net.node_count == 0:
        return net, {}
    comp = connected_components(net)
    sizes = np.bincount(comp)
    best = int(np.argmax(sizes))
    return induced_subnetwork(net, np.flatnonzero(comp == best))


def remove_random_edges(net: Network, fraction: float, rng: np.random.Generator) -> tuple[Network, EdgeSet]:
    """Remove ``round(fraction * |E|)`` edges uniformly without replacement."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    edges = net.edges()
    n_remove = int(round(fraction * len(edges)))
    chosen = rng.choice(len(edges), size=n_remove, replace=False) if n_remove else np.zeros(0, dtype=np.int64)
    mask = np.ones(len(edges), dtype=bool)
    mask[chosen] = False
    remaining = Network.from_edges(net.node_count, edges[mask], net.node_names)
    return remaining, EdgeSet(edges[~mask])


# -- generators --------------------------------------------------------------

def generate_sbm(n: int, communities: int, p_in: float, p_out: float,
                 rng: np.random.Generator) -> tuple[Network, LabelSet]:
    """Stochastic block model with uniform-random community membership.

    Every unordered pair is connected independently with ``p_in`` when both
    endpoints share a community and ``p_out`` otherwise.
    """
    if not n >= communities >= 1:
        raise ValueError("need n >= communities >= 1")
    if not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    member = rng.integers(0, communities, size=n)
    edges = []
    # row-by-row keeps memory at O(n) per step
    for u in range(n - 1):
        others = np.arange(u + 1, n)
        probs = np.where(member[others] == member[u], p_in, p_out)
        hit = rng.random(len(others)) < probs
        if hit.any():
            edges.append(np.column_stack([np.full(hit.sum(), u), others[hit]]))
    edge_arr = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
    net = Network.from_edges(n, edge_arr)
    labels = LabelSet([frozenset([int(c)]) for c in member], communities)
    return net, labels


def sbm_expected_edges(sizes: Sequence[int], p_in: float, p_out: float) -> tuple[float, float]:
    """Mean and variance of the SBM edge count given realised community sizes."""
    sizes = np.asarray(sizes, dtype=float)
    n = sizes.sum()
    intra = float(np.sum(sizes * (sizes - 1) / 2))
    inter = n * (n - 1) / 2 - intra
    mean = intra * p_in + inter * p_out
    var = intra * p_in * (1 - p_in) + inter * p_out * (1 - p_out)
    return mean, var


def write_sbm(out_dir: Path, net: Network, labels: LabelSet, meta: dict) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "edges": out_dir / "sbm.edgelist",
        "labels": out_dir / "sbm.labels",
        "meta": out_dir / "sbm.meta.json",
    }
    header = f"# {json.dumps(meta, sort_keys=True)}\n"
    paths["edges"].write_text(header + serialize_edge_list(net))
    paths["labels"].write_text(header + serialize_labels(labels, net.node_names))
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return paths
