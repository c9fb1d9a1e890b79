import itertools
from collections import deque

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from manela.agents import build_view
from manela.graph import Network
from manela.sampler import (
    RatioVector,
    empirical_distribution,
    exact_m_distribution,
    hop_counts,
    mixed_walk_distribution,
    sample_targets,
    total_variation,
    walk_endpoint_distribution,
)

from conftest import cycle_graph, path_graph, star_graph, toy_graphs


def brute_force_endpoints(net, v, k):
    """Enumerate every k-step walk explicitly and multiply step probabilities."""
    out = {}

    def rec(cur, depth, p):
        if depth == k:
            out[cur] = out.get(cur, 0.0) + p
            return
        nbrs = net.neighbors(cur).tolist()
        for x in nbrs:
            rec(x, depth + 1, p / len(nbrs))

    rec(v, 0, 1.0)
    return out


def bfs_shells(adj, v):
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        for x in adj[u]:
            if x not in dist:
                dist[x] = dist[u] + 1
                queue.append(x)
    return dist


def chi_square_pvalue(samples, expected):
    keys = sorted(expected)
    counts = np.array([np.count_nonzero(np.asarray(samples) == k) for k in keys])
    assert counts.sum() == len(samples), "sample outside oracle support"
    exp = np.array([expected[k] for k in keys]) * len(samples)
    return stats.chisquare(counts, exp).pvalue


class TestRatioVector:
    def test_validation(self):
        with pytest.raises(ValueError):
            RatioVector((0.5, 0.6))
        with pytest.raises(ValueError):
            RatioVector((1.2, -0.2))
        with pytest.raises(ValueError):
            RatioVector(())
        assert RatioVector.from_r1(0.3).r == (0.3, 0.7)

    def test_round_half_even(self):
        # 2w*r = 2.5 and 3.5: banker's rounding gives 2 and 4
        assert hop_counts(5, RatioVector((0.25, 0.75))).tolist() == [2, 8]
        assert hop_counts(1, RatioVector((0.25, 0.75))).tolist() == [0, 2]
        assert hop_counts(1, RatioVector((0.75, 0.25))).tolist() == [2, 0]


class TestSampleTargets:
    def test_path_center(self):
        net = path_graph(3)
        view = build_view(net, 1, 1)
        rng = np.random.RandomState(0)
        draws = [sample_targets(view, 1, 1, RatioVector((1.0,)), rng) for _ in range(4000)]
        assert all(len(d) == 2 and set(d) <= {0, 2} for d in draws)
        share = np.mean([x == 0 for d in draws for x in d])
        assert abs(share - 0.5) < 3 * (0.25 / 8000) ** 0.5

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 6))
    def test_one_hop_only_neighbors(self, seed, w):
        net = toy_graphs()["irregular"][0]
        rng = np.random.RandomState(seed)
        v = seed % net.node_count
        targets = sample_targets(build_view(net, v, 1), v, w, RatioVector((1.0,)), rng)
        nbrs = set(net.neighbors(v).tolist())
        assert len(targets) == 2 * w
        assert set(targets) <= nbrs

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0, 1))
    def test_never_returns_source_and_within_horizon(self, seed, r1):
        net = toy_graphs()["barbell"][0]
        r = RatioVector.from_r1(r1)
        v = seed % net.node_count
        targets = sample_targets(build_view(net, v, 2), v, 5, r, np.random.RandomState(seed))
        dist = bfs_shells({u: net.neighbors(u).tolist() for u in range(net.node_count)}, v)
        assert v not in targets
        assert len(targets) <= hop_counts(5, r).sum()
        assert all(1 <= dist[t] <= 2 for t in targets)

    def test_isolated_source_is_empty(self):
        net = Network.from_edges(3, [(0, 1)])
        assert sample_targets(build_view(net, 2, 2), 2, 3, RatioVector((0.5, 0.5)), np.random.RandomState(0)) == []

    def test_junction_chi_square(self):
        # triangle plus pendant, source at the junction, 1e5 seeded iterations
        net, v = toy_graphs()["triangle_pendant"]
        r = RatioVector((0.5, 0.5))
        view = build_view(net, v, 2)
        rng = np.random.RandomState(2023)
        samples = []
        for _ in range(100_000):
            samples.extend(sample_targets(view, v, 10, r, rng, drop_source=False))
        assert chi_square_pvalue(samples, mixed_walk_distribution(net, v, 10, r)) > 0.01

    @pytest.mark.parametrize("name", ["lollipop", "barbell", "irregular"])
    def test_other_toys_chi_square(self, name):
        net, v = toy_graphs()[name]
        r = RatioVector((0.2, 0.3, 0.5))
        view = build_view(net, v, 3)
        rng = np.random.RandomState(7)
        samples = []
        while len(samples) < 100_000:
            samples.extend(sample_targets(view, v, 10, r, rng, drop_source=False))
        assert chi_square_pvalue(samples, mixed_walk_distribution(net, v, 10, r)) > 0.01

    def test_removal_renormalises(self):
        net, v = toy_graphs()["lollipop"]
        r = RatioVector((0.5, 0.5))
        rng = np.random.RandomState(11)
        view = build_view(net, v, 2)
        samples = []
        while len(samples) < 50_000:
            samples.extend(sample_targets(view, v, 10, r, rng))
        assert chi_square_pvalue(samples, mixed_walk_distribution(net, v, 10, r, drop_source=True)) > 0.01


class TestWalkDistribution:
    def test_path_two_steps(self):
        assert walk_endpoint_distribution(path_graph(3), 0, 2) == pytest.approx({0: 0.5, 2: 0.5})

    def test_one_step_uniform(self):
        net = toy_graphs()["irregular"][0]
        for v in range(net.node_count):
            nbrs = net.neighbors(v).tolist()
            assert walk_endpoint_distribution(net, v, 1) == pytest.approx({u: 1 / len(nbrs) for u in nbrs})

    def test_star_returns(self):
        assert walk_endpoint_distribution(star_graph(5), 0, 2) == pytest.approx({0: 1.0})

    @pytest.mark.parametrize("name", list(toy_graphs()))
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_matches_enumeration(self, name, k):
        net, v = toy_graphs()[name]
        dp = walk_endpoint_distribution(net, v, k)
        brute = brute_force_endpoints(net, v, k)
        assert set(dp) == set(brute)
        for u in brute:
            assert dp[u] == pytest.approx(brute[u], abs=1e-12)

    @pytest.mark.parametrize("name", list(toy_graphs()))
    def test_sums_to_one(self, name):
        net, _ = toy_graphs()[name]
        for v, k in itertools.product(range(net.node_count), range(1, 6)):
            assert abs(sum(walk_endpoint_distribution(net, v, k).values()) - 1.0) <= 1e-12

    @pytest.mark.parametrize("n,k", [(7, 3), (8, 4), (9, 5)])
    def test_cycle_symmetry(self, n, k):
        net = cycle_graph(n)
        v = 2
        dist = walk_endpoint_distribution(net, v, k)
        for offset in range(1, n):
            assert dist.get((v + offset) % n, 0.0) == pytest.approx(dist.get((v - offset) % n, 0.0), abs=1e-15)

    def test_isolated_raises(self):
        with pytest.raises(ValueError):
            walk_endpoint_distribution(Network.from_edges(2, []), 0, 1)


class TestExactM:
    def test_path(self):
        got = exact_m_distribution(path_graph(4), 0, 2, RatioVector((0.5, 0.5)))
        assert got == pytest.approx({1: 0.5, 2: 0.5})

    def test_star(self):
        got = exact_m_distribution(star_graph(4), 0, 1, RatioVector((1.0,)))
        assert got == pytest.approx({i: 0.25 for i in range(1, 5)})

    def test_empty_shell_renormalised(self):
        # star center: no nodes at distance 2, so all mass goes to distance 1
        got = exact_m_distribution(star_graph(3), 0, 2, RatioVector((0.5, 0.5)))
        assert got == pytest.approx({i: 1 / 3 for i in range(1, 4)})

    def test_isolated_raises(self):
        with pytest.raises(ValueError):
            exact_m_distribution(Network.from_edges(2, []), 0, 1, RatioVector((1.0,)))

    def test_karate_club_shells(self):
        g = nx.karate_club_graph()
        net = Network.from_edges(g.number_of_nodes(), list(g.edges()))
        r = RatioVector((0.3, 0.5, 0.2))
        for v in range(net.node_count):
            lengths = nx.single_source_shortest_path_length(g, v, cutoff=3)
            oracle = {}
            for k in (1, 2, 3):
                shell = [u for u, d in lengths.items() if d == k]
                for u in shell:
                    oracle[u] = r[k - 1] / len(shell)
            z = sum(oracle.values())
            oracle = {u: p / z for u, p in oracle.items()}
            got = exact_m_distribution(net, v, 3, r)
            assert set(got) == set(oracle)
            for u in oracle:
                assert got[u] == pytest.approx(oracle[u], abs=1e-12)

    def test_walk_vs_m_diagnostic(self):
        # the walk law weights hubs more; only report the gap
        g = nx.karate_club_graph()
        net = Network.from_edges(g.number_of_nodes(), list(g.edges()))
        r = RatioVector((0.5, 0.5))
        gaps = []
        for v in range(net.node_count):
            gaps.append(total_variation(mixed_walk_distribution(net, v, 10, r, drop_source=True),
                                        exact_m_distribution(net, v, 2, r)))
        assert all(0.0 <= g <= 1.0 for g in gaps)
        print(f"karate TV(walk, M): mean={np.mean(gaps):.3f} max={np.max(gaps):.3f}")


def test_empirical_distribution():
    assert empirical_distribution([1, 1, 2, 5]) == {1: 0.5, 2: 0.25, 5: 0.25}
