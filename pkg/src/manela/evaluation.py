"""Node classification and link prediction protocols and their metrics."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .agents import RunStats
from .embedding import Embedding, sigmoid
from .graph import EdgeSet, LabelSet, Network, largest_connected_component, remove_random_edges

logger = logging.getLogger(__name__)


# -- classifier --------------------------------------------------------------

@dataclass
class ClassifierModel:
    """One logistic model per label on standardised features."""

    weights: np.ndarray  # (label_count, m)
    bias: np.ndarray  # (label_count,)
    mean: np.ndarray
    scale: np.ndarray

    @property
    def label_count(self) -> int:
        return self.weights.shape[0]

    def scores(self, features) -> np.ndarray:
        x = (np.atleast_2d(np.asarray(features, dtype=np.float64)) - self.mean) / self.scale
        return sigmoid(x @ self.weights.T + self.bias)


def _label_matrix(labels, n: int) -> np.ndarray:
    if isinstance(labels, LabelSet):
        return labels.to_matrix()
    y = np.asarray(labels, dtype=bool)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != n:
        raise ValueError("labels and features disagree on the number of rows")
    return y


def train_logistic_ovr(features, labels, epochs: int = 100, rate: float | None = None,
                       rng=None, l2: float = 0.0) -> ClassifierModel:
    """Fit one-vs-rest logistic regression by full-batch gradient descent.

    Features are standardised with training statistics.  Each bias starts at
    the log-odds of its label's prevalence, so a label with no usable signal
    stays at its prior.  ``rate=None`` uses the step ``1/L`` from the
    Lipschitz constant of the mean logistic loss.  ``rng`` is unused (the fit
    is deterministic) and kept for interface symmetry.
    """
    x = np.asarray(features, dtype=np.float64)
    n, m = x.shape
    y = _label_matrix(labels, n).astype(np.float64)
    if y.sum() == 0:
        raise ValueError("no positive example for any label")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    xs = (x - mean) / scale
    prevalence = y.mean(axis=0)
    empty = np.flatnonzero(prevalence == 0)
    if len(empty):
        logger.info("%d label(s) have no positive training example", len(empty))
    p = np.clip(prevalence, 1e-6, 1 - 1e-6)
    bias = np.log(p / (1 - p))
    weights = np.zeros((y.shape[1], m))
    if rate is None:
        design = np.hstack([xs, np.ones((n, 1))])
        top = np.linalg.norm(design, 2) if n else 0.0
        lipschitz = 0.25 * top * top / max(n, 1) + l2
        rate = 1.0 / lipschitz if lipschitz > 0 else 1.0
    for _ in range(epochs):
        resid = sigmoid(xs @ weights.T + bias) - y  # (n, L)
        weights -= rate * (resid.T @ xs / n + l2 * weights)
        bias -= rate * resid.mean(axis=0)
    return ClassifierModel(weights, bias, mean, scale)


def _topk(scores: np.ndarray, k: int) -> list[int]:
    order = np.argsort(-scores, kind="stable")  # ties keep lower label id first
    return sorted(order[:max(k, 0)].tolist())


def predict_multilabel(model: ClassifierModel, feature, k: int) -> frozenset[int]:
    """The ``k`` labels with the highest scores."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return frozenset(_topk(model.scores(feature)[0], k))


def predict_topk(model: ClassifierModel, features, ks: Sequence[int]) -> list[frozenset[int]]:
    scores = model.scores(features)
    return [frozenset(_topk(row, k)) for row, k in zip(scores, ks)]


# -- F1 ----------------------------------------------------------------------

def _as_matrix(sets, label_count: int | None = None) -> np.ndarray:
    if isinstance(sets, LabelSet):
        return sets.to_matrix()
    sets = [frozenset(s) for s in sets]
    if label_count is None:
        label_count = 1 + max((max(s) for s in sets if s), default=-1)
    mat = np.zeros((len(sets), label_count), dtype=bool)
    for i, s in enumerate(sets):
        mat[i, list(s)] = True
    return mat


def _pair(pred, truth):
    count = None
    for obj in (pred, truth):
        if isinstance(obj, LabelSet):
            count = obj.label_count
    if count is None:
        count = 1 + max((max(s) for s in list(pred) + list(truth) if s), default=-1)
    p, t = _as_matrix(pred, count), _as_matrix(truth, count)
    if p.shape != t.shape:
        raise ValueError("prediction and truth cover different node sets")
    return p, t


def micro_f1(pred, truth) -> float:
    """F1 over pooled (node, label) decisions."""
    p, t = _pair(pred, truth)
    tp = np.sum(p & t)
    denom = p.sum() + t.sum()
    return float(2 * tp / denom) if denom else 0.0


def macro_f1(pred, truth) -> float:
    """Unweighted mean of per-label F1.

    Labels absent from ``truth`` are skipped unless predicted, in which case
    they count as F1 = 0.
    """
    p, t = _pair(pred, truth)
    tp = np.sum(p & t, axis=0)
    fp = np.sum(p & ~t, axis=0)
    fn = np.sum(~p & t, axis=0)
    present = t.any(axis=0)
    keep = present | (fp > 0)
    if not keep.any():
        return 0.0
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(len(tp)), where=denom > 0)
    return float(f1[keep].mean())


# -- reports -----------------------------------------------------------------

@dataclass
class EvalReport:
    """Metric points with mean and spread over repeats, plus the config that produced them."""

    config: dict = field(default_factory=dict)
    points: list[dict] = field(default_factory=list)

    def add(self, metric: str, x, values: Sequence[float]) -> None:
        vals = [float(v) for v in values]
        if not vals:
            raise ValueError("at least one repeat is required")
        self.points.append({
            "metric": metric,
            "x": x,
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals)),
            "values": vals,
        })

    def get(self, metric: str, x=None) -> dict:
        for p in self.points:
            if p["metric"] == metric and (x is None or p["x"] == x):
                return p
        raise KeyError((metric, x))

    def mean(self, metric: str, x=None) -> float:
        return self.get(metric, x)["mean"]

    def to_records(self) -> str:
        lines = [json.dumps({"config": self.config}, sort_keys=True)]
        for p in self.points:
            lines.append(json.dumps({k: p[k] for k in ("metric", "x", "mean", "std")}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = [f"# config: {json.dumps(self.config, sort_keys=True)}",
                 f"{'metric':<16}{'x':>10}{'mean':>12}{'std':>12}"]
        for p in self.points:
            lines.append(f"{p['metric']:<16}{str(p['x']):>10}{p['mean']:>12.4f}{p['std']:>12.4f}")
        return "\n".join(lines) + "\n"

    def to_curves(self, delimiter: str = ",") -> str:
        """One row per x with mean/std columns for every metric, for plotting."""
        metrics = list(dict.fromkeys(p["metric"] for p in self.points))
        xs = list(dict.fromkeys(p["x"] for p in self.points))
        header = ["x"] + [f"{m}_{s}" for m in metrics for s in ("mean", "std")]
        rows = [f"# config: {json.dumps(self.config, sort_keys=True)}", delimiter.join(header)]
        for x in xs:
            cells = [str(x)]
            for m in metrics:
                try:
                    p = self.get(m, x)
                    cells += [f"{p['mean']:.6f}", f"{p['std']:.6f}"]
                except KeyError:
                    cells += ["", ""]
            rows.append(delimiter.join(cells))
        return "\n".join(rows) + "\n"

    def write(self, prefix: str | Path) -> dict[str, Path]:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        paths = {
            "table": prefix.with_name(prefix.name + ".txt"),
            "records": prefix.with_name(prefix.name + ".jsonl"),
            "curves": prefix.with_name(prefix.name + ".csv"),
        }
        paths["table"].write_text(self.to_table())
        paths["records"].write_text(self.to_records())
        paths["curves"].write_text(self.to_curves())
        return paths


# -- node classification -----------------------------------------------------

def _split(n: int, ratio: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_train = min(max(1, int(round(ratio * n))), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def node_classification_experiment(emb: Embedding, labels: LabelSet, ratios: Sequence[float],
                                   repeats: int, rng: np.random.Generator,
                                   epochs: int = 100, predictor=None) -> EvalReport:
    """Random train/test splits per ratio; test nodes get as many labels as they truly have.

    Only nodes carrying at least one label take part.  ``predictor``, when
    given, replaces the embedding classifier: it is called as
    ``predictor(train_nodes, test_nodes, k_per_test_node)`` and returns label
    sets for the test nodes (used for the RN baseline).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if any(not 0 < r < 1 for r in ratios):
        raise ValueError("ratios must lie strictly between 0 and 1")
    y = labels.to_matrix()
    nodes = np.flatnonzero(y.any(axis=1))
    report = EvalReport({"ratios": list(ratios), "repeats": repeats, "epochs": epochs,
                         "nodes": int(len(nodes)), "labels": labels.label_count})
    for ratio in ratios:
        micro, macro = [], []
        for _ in range(repeats):
            tr, te = _split(len(nodes), ratio, rng)
            train_nodes, test_nodes = nodes[tr], nodes[te]
            ks = y[test_nodes].sum(axis=1)
            if predictor is None:
                model = train_logistic_ovr(emb.vectors[train_nodes], y[train_nodes], epochs=epochs)
                pred = predict_topk(model, emb.vectors[test_nodes], ks)
            else:
                pred = predictor(train_nodes, test_nodes, ks)
            truth = LabelSet.from_matrix(y[test_nodes])
            pred_set = LabelSet(list(pred), labels.label_count)
            micro.append(micro_f1(pred_set, truth))
            macro.append(macro_f1(pred_set, truth))
        report.add("micro_f1", ratio, micro)
        report.add("macro_f1", ratio, macro)
    return report


def rn_predictor(net: Network, labels: LabelSet):
    """Adapter running Relational Neighbors inside the classification protocol."""
    from .baselines import run_rn

    def predict(train_nodes, test_nodes, ks):
        seed = [frozenset()] * net.node_count
        for v in train_nodes:
            seed[v] = labels.labels[v]
        k_per_node = np.ones(net.node_count, dtype=np.int64)
        k_per_node[test_nodes] = ks
        done = run_rn(net, LabelSet(seed, labels.label_count, labels.label_names), k_per_node=k_per_node)
        return [done.labels[v] for v in test_nodes]

    return predict


# -- link prediction ---------------------------------------------------------

@dataclass
class RankedEdgeList:
    """Edges sorted by descending score; ties by ascending ``(u, v)``."""

    edges: np.ndarray  # (E, 2), u < v
    scores: np.ndarray

    def __len__(self):
        return len(self.edges)


def rank_edges(edges: np.ndarray, scores: np.ndarray) -> RankedEdgeList:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((edges[:, 1], edges[:, 0], -scores))
    return RankedEdgeList(edges[order], scores[order])


def score_edges(emb: Embedding, candidates: EdgeSet) -> RankedEdgeList:
    """Score each candidate ``(u, v)`` by ``phi_u . phi_v`` and rank."""
    pairs = candidates.pairs
    if len(pairs) and pairs.max() >= emb.node_count:
        raise ValueError("candidate endpoint outside the embedding")
    scores = np.einsum("ij,ij->i", emb.vectors[pairs[:, 0]], emb.vectors[pairs[:, 1]])
    return rank_edges(pairs, scores)


def _hits(pred: RankedEdgeList, obs: EdgeSet, n: int) -> np.ndarray:
    if len(obs) == 0 or len(pred) == 0:
        return np.zeros(len(pred), dtype=bool)
    return np.isin(pred.edges[:, 0] * n + pred.edges[:, 1], obs.keys(n))


def precision_at_k(pred: RankedEdgeList, obs: EdgeSet, k: int) -> float:
    """Fraction of the top ``k`` ranked edges that are observed."""
    if not 1 <= k <= len(pred):
        raise ValueError(f"k={k} outside [1, {len(pred)}]")
    top = RankedEdgeList(pred.edges[:k], pred.scores[:k])
    n = int(max(pred.edges.max(), obs.pairs.max() if len(obs) else 0)) + 1
    return float(_hits(top, obs, n).sum() / k)


def mean_average_precision(pred: RankedEdgeList, obs: EdgeSet, net: Network) -> float:
    """Mean over all nodes of the average precision of each node's incident sublist.

    A node's sublist keeps the global order; its AP divides the summed
    precision at each hit by the number of hits (at least 1), so nodes with
    no observed incident edge score 0.
    """
    n = net.node_count
    if n == 0:
        return 0.0
    hits = _hits(pred, obs, n)
    rank = np.arange(len(pred))
    node = np.concatenate([pred.edges[:, 0], pred.edges[:, 1]])
    pos = np.concatenate([rank, rank])
    hit = np.concatenate([hits, hits])
    order = np.lexsort((pos, node))
    node, hit = node[order], hit[order]
    starts = np.searchsorted(node, node, side="left")
    within = np.arange(len(node)) - starts + 1  # 1-based rank within the node's sublist
    cum = np.cumsum(hit)
    before = np.concatenate([[0], cum])[starts]
    cum_hits = cum - before
    precision = cum_hits / within
    numer = np.bincount(node, weights=np.where(hit, precision, 0.0), minlength=n)
    count = np.bincount(node, weights=hit.astype(float), minlength=n)
    return float(np.sum(numer / np.maximum(count, 1)) / n)


def _per_node_map(vectors: np.ndarray, train: Network, obs: EdgeSet,
                  nodes: np.ndarray | None = None) -> float:
    """MAP over the full non-edge candidate universe, computed node by node.

    Equivalent to ranking every non-training pair globally and calling
    :func:`mean_average_precision`, without materialising the global list.
    """
    n = train.node_count
    obs_nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in obs.pairs.tolist():
        obs_nbrs[u].append(v)
        obs_nbrs[v].append(u)
    nodes = np.arange(n) if nodes is None else nodes
    total = 0.0
    for v in nodes.tolist():
        if not obs_nbrs[v]:
            continue
        cand = np.ones(n, dtype=bool)
        cand[v] = False
        cand[train.neighbors(v)] = False
        ids = np.flatnonzero(cand)
        s = vectors[ids] @ vectors[v]
        order = np.lexsort((ids, -s))
        is_hit = np.isin(ids[order], obs_nbrs[v])
        if not is_hit.any():
            continue
        prec = np.cumsum(is_hit) / np.arange(1, len(ids) + 1)
        total += prec[is_hit].sum() / is_hit.sum()
    return total / len(nodes)


def non_edges_incident(train: Network, nodes: np.ndarray) -> np.ndarray:
    """All pairs ``(u, v)``, ``u < v``, touching ``nodes`` and absent from ``train``."""
    n = train.node_count
    chunks = []
    node_set = np.zeros(n, dtype=bool)
    node_set[nodes] = True
    for v in np.sort(nodes).tolist():
        cand = np.ones(n, dtype=bool)
        cand[v] = False
        cand[train.neighbors(v)] = False
        # pairs between two sampled nodes are emitted once, from the lower id
        cand[:v] &= ~node_set[:v]
        others = np.flatnonzero(cand)
        chunks.append(np.column_stack([np.minimum(others, v), np.maximum(others, v)]))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(chunks)


def link_prediction_experiment(net: Network, trainer: Callable[[Network, int], Embedding],
                               runs: int, sample_nodes: int, rng: np.random.Generator,
                               fraction: float = 0.2, ks: Sequence[int] = (1, 10, 100, 1000, 10000),
                               map_sample_nodes: int | None = None) -> EvalReport:
    """Hold out ``fraction`` of the edges, train on the largest remaining
    component and rank non-edges by inner product.

    Precision@k uses non-edges incident to ``sample_nodes`` random nodes; MAP
    uses every node's full non-edge candidate list (or ``map_sample_nodes``
    random nodes when set).  ``trainer(train_net, seed)`` returns an embedding
    whose rows follow ``train_net``'s ids.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    report = EvalReport({"runs": runs, "sample_nodes": sample_nodes, "fraction": fraction,
                         "ks": list(ks), "map_sample_nodes": map_sample_nodes})
    maps = []
    prec: dict[int, list[float]] = {k: [] for k in ks}
    dropped_total = 0
    for run in range(runs):
        residual, removed = remove_random_edges(net, fraction, rng)
        train, remap = largest_connected_component(residual)
        lookup = np.full(net.node_count, -1, dtype=np.int64)
        lookup[list(remap)] = list(remap.values())
        mapped = lookup[removed.pairs] if len(removed) else np.zeros((0, 2), dtype=np.int64)
        keep = (mapped >= 0).all(axis=1)
        dropped_total += int((~keep).sum())
        obs = EdgeSet(mapped[keep])
        seed = int(rng.integers(0, 2**31 - 1))
        emb = trainer(train, seed)
        if emb.node_count != train.node_count:
            raise ValueError("trainer returned an embedding of the wrong size")
        if map_sample_nodes is None:
            maps.append(_per_node_map(emb.vectors, train, obs))
        else:
            picked = rng.choice(train.node_count, size=min(map_sample_nodes, train.node_count), replace=False)
            maps.append(_per_node_map(emb.vectors, train, obs, np.sort(picked)))
        vs = rng.choice(train.node_count, size=min(sample_nodes, train.node_count), replace=False)
        cand = non_edges_incident(train, vs)
        scores = np.einsum("ij,ij->i", emb.vectors[cand[:, 0]], emb.vectors[cand[:, 1]])
        ranked = rank_edges(cand, scores)
        for k in ks:
            if k <= len(ranked):
                prec[k].append(precision_at_k(ranked, obs, k))
        logger.info("run %d: MAP %.4f", run, maps[-1])
    if dropped_total:
        logger.info("%d held-out edge(s) fell outside the retained component", dropped_total)
    report.config["dropped_obs"] = dropped_total
    report.add("map", "all" if map_sample_nodes is None else map_sample_nodes, maps)
    for k in ks:
        if prec[k]:
            report.add("precision_at_k", k, prec[k])
    return report


def degree_update_correlation(stats: RunStats, net: Network) -> float:
    """Pearson correlation between degree and source-update count.

    Constant counts on a graph with varying degrees give 0.0; constant
    degrees leave the correlation undefined (NaN).
    """
    return pearson_degree_counts(net.degrees, stats.source_counts)


def pearson_degree_counts(degrees, counts) -> float:
    d = np.asarray(degrees, dtype=np.float64)
    c = np.asarray(counts, dtype=np.float64)
    if d.std() == 0:
        return math.nan
    if c.std() == 0:
        return 0.0
    return float(np.corrcoef(d, c)[0, 1])
