"""Compiled training loops.

Every kernel consumes random numbers exclusively through ``np.random.random()``
in a fixed order.  Inside numba that is the per-thread MT19937 stream seeded by
``np.random.seed``, which yields the same sequence as ``np.random.RandomState``
with the same seed.  The Python-level reference engines in ``agents`` and
``baselines`` replay the same draw order through a ``RandomState``, so both
paths agree bit for bit.
"""

import math

import numpy as np
from numba import njit, prange


@njit(cache=True)
def sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@njit(cache=True)
def row_dot(vectors, a, b):
    acc = 0.0
    for i in range(vectors.shape[1]):
        acc += vectors[a, i] * vectors[b, i]
    return acc


@njit(cache=True)
def update_row(vectors, src, tgt, negatives, alpha):
    """One update pair on row ``src``: a positive step towards ``tgt`` then
    one negative step away from each row in ``negatives``, in order."""
    g = alpha * (1.0 - sigmoid(row_dot(vectors, src, tgt)))
    for i in range(vectors.shape[1]):
        vectors[src, i] += g * vectors[tgt, i]
    for j in range(negatives.shape[0]):
        neg = negatives[j]
        g = -alpha * sigmoid(row_dot(vectors, src, neg))
        for i in range(vectors.shape[1]):
            vectors[src, i] += g * vectors[neg, i]


@njit(cache=True)
def rate_at(alpha0, floor_fraction, budget, done):
    frac = 1.0 - done / budget
    if frac < floor_fraction:
        frac = floor_fraction
    return alpha0 * frac


@njit(cache=True)
def draw_index(n):
    # floor(u * n) on a 53-bit uniform; identical in numba and numpy
    return int(np.random.random() * n)


@njit(cache=True)
def pick_source(cum_deg):
    # cum_deg[i] = sum of degrees of nodes 0..i; zero-degree nodes are never hit
    u = np.random.random() * cum_deg[-1]
    return np.searchsorted(cum_deg, u, side="right")


@njit(cache=True)
def manela_loop(indptr, indices, cum_deg, vectors, counts, hop_counts, kappa,
                alpha0, floor_fraction, budget, done, schedule_budget, seed,
                audit, audit_on, max_empty_streak):
    """Run MANELA iterations until ``budget`` update pairs have executed.

    ``hop_counts[k-1]`` walks of length ``k`` are drawn per iteration.  Walk
    step ``j`` only reads the adjacency of a node reached after ``j`` hops from
    the acting node, so with ``len(hop_counts) == s`` every read stays inside
    the acting agent's view.  ``audit[src, u]`` is set for each node ``u`` whose
    adjacency is read or whose id is revealed by a read.

    Returns ``(pairs_done, iterations, empty_iterations, stalled)``.
    """
    if seed >= 0:
        np.random.seed(seed)
    n = indptr.shape[0] - 1
    total_targets = 0
    for k in range(hop_counts.shape[0]):
        total_targets += hop_counts[k]
    targets = np.empty(total_targets, dtype=np.int64)
    negatives = np.empty(kappa, dtype=np.int64)
    iterations = 0
    empty = 0
    streak = 0
    stalled = False
    while done < budget:
        src = pick_source(cum_deg)
        iterations += 1
        nt = 0
        for k in range(hop_counts.shape[0]):
            for _ in range(hop_counts[k]):
                cur = src
                for _step in range(k + 1):
                    start = indptr[cur]
                    deg = indptr[cur + 1] - start
                    nxt = indices[start + draw_index(deg)]
                    if audit_on:
                        audit[src, cur] = True
                        audit[src, nxt] = True
                    cur = nxt
                if cur != src:
                    targets[nt] = cur
                    nt += 1
        if nt == 0:
            empty += 1
            streak += 1
            if streak >= max_empty_streak:
                stalled = True
                break
            continue
        streak = 0
        for t in range(nt):
            if done >= budget:
                break
            alpha = rate_at(alpha0, floor_fraction, schedule_budget, done)
            for j in range(kappa):
                negatives[j] = draw_index(n)
            update_row(vectors, src, targets[t], negatives, alpha)
            counts[src] += 1
            done += 1
    return done, iterations, empty, stalled


@njit(cache=True)
def shuffle_inplace(arr):
    for i in range(arr.shape[0] - 1, 0, -1):
        j = draw_index(i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


@njit(cache=True)
def walk_into(indptr, indices, start, ell, path):
    """Uniform random walk of ``ell`` nodes into ``path``; returns its length
    (1 when ``start`` is isolated)."""
    path[0] = start
    cur = start
    for i in range(1, ell):
        s = indptr[cur]
        deg = indptr[cur + 1] - s
        if deg == 0:
            return i
        cur = indices[s + draw_index(deg)]
        path[i] = cur
    return ell


@njit(cache=True)
def deepwalk_loop(indptr, indices, vectors, counts, gamma, ell, window, kappa,
                  alpha0, floor_fraction, schedule_budget, seed):
    """DeepWalk with negative sampling over the shared update-pair primitive.

    Returns ``(pairs_done, short_walks)``.
    """
    if seed >= 0:
        np.random.seed(seed)
    n = indptr.shape[0] - 1
    order = np.arange(n)
    path = np.empty(ell, dtype=np.int64)
    negatives = np.empty(kappa, dtype=np.int64)
    done = 0
    short = 0
    for _ in range(gamma):
        shuffle_inplace(order)
        for o in range(n):
            length = walk_into(indptr, indices, order[o], ell, path)
            if length < ell:
                short += 1
            for i in range(length):
                lo = max(0, i - window)
                hi = min(length - 1, i + window)
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    alpha = rate_at(alpha0, floor_fraction, schedule_budget, done)
                    for q in range(kappa):
                        negatives[q] = draw_index(n)
                    update_row(vectors, path[i], path[j], negatives, alpha)
                    counts[path[i]] += 1
                    done += 1
    return done, short


@njit(cache=True, parallel=True)
def manela_parallel(indptr, indices, shard_cum, shard_nodes, shard_offsets,
                    shard_budgets, vectors, counts, hop_counts, kappa, alpha0,
                    floor_fraction, seeds, audit, audit_on, max_empty_streak):
    """Hogwild-style variant: worker ``t`` acts only for the nodes of its shard,
    so every worker writes disjoint rows while reading any row unsynchronised."""
    n_workers = shard_budgets.shape[0]
    done_per = np.zeros(n_workers, dtype=np.int64)
    for t in prange(n_workers):
        np.random.seed(seeds[t])
        lo = shard_offsets[t]
        hi = shard_offsets[t + 1]
        cum = shard_cum[lo:hi]
        nodes = shard_nodes[lo:hi]
        n = indptr.shape[0] - 1
        budget = shard_budgets[t]
        total_targets = 0
        for k in range(hop_counts.shape[0]):
            total_targets += hop_counts[k]
        targets = np.empty(total_targets, dtype=np.int64)
        negatives = np.empty(kappa, dtype=np.int64)
        done = 0
        streak = 0
        while done < budget and hi > lo and cum[-1] > 0:
            src = nodes[np.searchsorted(cum, np.random.random() * cum[-1], side="right")]
            nt = 0
            for k in range(hop_counts.shape[0]):
                for _ in range(hop_counts[k]):
                    cur = src
                    for _step in range(k + 1):
                        start = indptr[cur]
                        deg = indptr[cur + 1] - start
                        nxt = indices[start + int(np.random.random() * deg)]
                        if audit_on:
                            audit[src, cur] = True
                            audit[src, nxt] = True
                        cur = nxt
                    if cur != src:
                        targets[nt] = cur
                        nt += 1
            if nt == 0:
                streak += 1
                if streak >= max_empty_streak:
                    break
                continue
            streak = 0
            for q in range(nt):
                if done >= budget:
                    break
                alpha = rate_at(alpha0, floor_fraction, budget, done)
                for j in range(kappa):
                    negatives[j] = int(np.random.random() * n)
                update_row(vectors, src, targets[q], negatives, alpha)
                counts[src] += 1
                done += 1
        done_per[t] = done
    return done_per
