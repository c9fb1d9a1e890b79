import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from manela.agents import (
    AccessViolation,
    TrainConfig,
    audit_records,
    audit_violations,
    build_view,
    run_manela,
    schedule_next,
    write_run_stats,
)
from manela.agents import _seed_streams
from manela.embedding import init_embedding
from manela.graph import Network, bfs_distances
from manela.sampler import RatioVector

from conftest import cycle_graph, path_graph, toy_graphs


def to_nx(net):
    g = nx.Graph()
    g.add_nodes_from(range(net.node_count))
    g.add_edges_from(net.edges().tolist())
    return g


class TestBuildView:
    def test_path(self):
        view = build_view(path_graph(4), 0, 2)
        assert view.visible_nodes == {0, 1, 2}
        assert view.edges() == {(0, 1), (1, 2)}
        assert 0 in view and 3 not in view

    def test_covers_connected_graph(self):
        net = toy_graphs()["irregular"][0]
        view = build_view(net, 3, 20)
        assert view.visible_nodes == set(range(net.node_count))
        assert view.edges() == {tuple(e) for e in net.edges().tolist()}

    def test_bfs_oracle_on_sbm(self, small_sbm):
        net, _ = small_sbm
        g = to_nx(net)
        for v in np.random.default_rng(0).choice(net.node_count, 15, replace=False).tolist():
            view = build_view(net, v, 2)
            ball = set(nx.single_source_shortest_path_length(g, v, cutoff=2))
            assert view.visible_nodes == ball
            assert view.edges() == {tuple(sorted(e)) for e in g.subgraph(ball).edges()}
            assert all(view.distances[u] <= 2 for u in view.visible_nodes)

    def test_outside_read_raises(self):
        view = build_view(path_graph(5), 0, 1)
        with pytest.raises(AccessViolation):
            view.neighbors(3)

    def test_horizon_validated(self):
        with pytest.raises(ValueError):
            build_view(path_graph(3), 0, 0)


class TestSchedule:
    def test_two_stars_ratio(self):
        edges = [(0, i) for i in range(1, 11)] + [(11, i) for i in range(12, 17)]
        net = Network.from_edges(17, edges)
        rng = np.random.RandomState(5)
        picks = np.array([schedule_next(net, rng) for _ in range(100_000)])
        big, small = np.count_nonzero(picks == 0), np.count_nonzero(picks == 11)
        n = big + small
        assert abs(big / n - 2 / 3) <= 3 * np.sqrt((2 / 9) / n)

    def test_regular_is_uniform(self):
        net = cycle_graph(10)
        rng = np.random.RandomState(2)
        picks = [schedule_next(net, rng) for _ in range(50_000)]
        assert stats.chisquare(np.bincount(picks, minlength=10)).pvalue > 0.01

    def test_sbm_chi_square(self, small_sbm):
        net, _ = small_sbm
        rng = np.random.RandomState(3)
        cum = np.cumsum(net.degrees)
        picks = [schedule_next(net, rng, cum) for _ in range(1_000_000)]
        expected = net.degrees / net.degrees.sum() * len(picks)
        observed = np.bincount(picks, minlength=net.node_count)
        assert stats.chisquare(observed, expected).pvalue > 0.01

    def test_edgeless_raises(self):
        with pytest.raises(ValueError):
            schedule_next(Network.from_edges(3, []), np.random.RandomState(0))


def _cfg(**kw):
    base = dict(m=8, w=4, r=RatioVector((0.5, 0.5)), kappa=3, budget_pairs=5000, seed=11)
    base.update(kw)
    return TrainConfig(**base)


class TestRunManela:
    def test_budget_zero_is_init(self, small_sbm):
        net, _ = small_sbm
        cfg = _cfg(budget_pairs=0)
        emb, stats_ = run_manela(net, cfg)
        init_rng, _ = _seed_streams(cfg.seed)
        assert np.array_equal(emb.vectors, init_embedding(net.node_count, cfg.m, init_rng).vectors)
        assert stats_.total_pairs == 0

    def test_deterministic(self, small_sbm):
        net, _ = small_sbm
        a, sa = run_manela(net, _cfg())
        b, sb = run_manela(net, _cfg())
        assert np.array_equal(a.vectors, b.vectors)
        assert np.array_equal(sa.source_counts, sb.source_counts)
        c, _ = run_manela(net, _cfg(seed=12))
        assert not np.array_equal(a.vectors, c.vectors)

    @pytest.mark.parametrize("r", [(1.0,), (0.5, 0.5), (0.2, 0.3, 0.5)])
    def test_fast_matches_reference(self, r):
        net = toy_graphs()["barbell"][0]
        cfg = _cfg(r=RatioVector(r), budget_pairs=3001)
        fast, sf = run_manela(net, cfg, audit=True)
        ref, sr = run_manela(net, cfg, audit=True, engine="reference")
        assert np.array_equal(fast.vectors, ref.vectors)
        assert np.array_equal(sf.source_counts, sr.source_counts)
        assert sf.iterations == sr.iterations
        # the kernel marks a subset of what the object-level view logs
        assert not (sf.audit & ~sr.audit).any()

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 20_000), st.integers(1, 6), st.floats(0, 1))
    def test_exact_budget(self, budget, w, r1):
        net = toy_graphs()["irregular"][0]
        cfg = TrainConfig(m=4, w=w, r=RatioVector.from_r1(r1), kappa=2, budget_pairs=budget, seed=budget)
        _, st_ = run_manela(net, cfg)
        assert st_.total_pairs == budget
        assert st_.source_counts.sum() == budget

    @pytest.mark.parametrize("engine", ["fast", "reference"])
    def test_audit_clean(self, small_sbm, engine):
        net, _ = small_sbm
        cfg = _cfg(r=RatioVector((0.2, 0.3, 0.5)), budget_pairs=20_000)
        _, st_ = run_manela(net, cfg, audit=True, engine=engine)
        assert len(st_.audit_pairs()) > 0
        assert audit_violations(st_, net, cfg.s) == []
        for a, b, d in audit_records(st_, net)[:500]:
            assert d == bfs_distances(net, a)[b]

    def test_counts_only_on_non_isolated(self):
        net = Network.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4)])
        _, st_ = run_manela(net, _cfg(budget_pairs=4000))
        assert st_.source_counts[5] == 0

    def test_stall_raises(self):
        # 2-hop walks on a single edge always return to the source
        with pytest.raises(RuntimeError, match="stalled"):
            run_manela(path_graph(2), _cfg(r=RatioVector((0.0, 1.0))))

    def test_edgeless_raises(self):
        with pytest.raises(ValueError):
            run_manela(Network.from_edges(4, []), _cfg())

    def test_bad_engine(self):
        with pytest.raises(ValueError):
            run_manela(path_graph(3), _cfg(), engine="gpu")

    def test_parallel_budget(self, small_sbm):
        net, _ = small_sbm
        _, st_ = run_manela(net, _cfg(threads=2, budget_pairs=30_000))
        assert st_.total_pairs == 30_000
        assert st_.source_counts.sum() == 30_000

    def test_config_validation(self):
        with pytest.raises(ValueError):
            _cfg(budget_pairs=-1)
        with pytest.raises(ValueError):
            _cfg(kappa=-1)
        with pytest.raises(ValueError):
            _cfg(w=1, r=RatioVector((0.25,) * 4))  # every 2w*r_k rounds to 0
        assert _cfg(r=[0.3, 0.7]).s == 2


def test_run_stats_table(tmp_path, small_sbm):
    net, _ = small_sbm
    _, st_ = run_manela(net, _cfg(budget_pairs=2000))
    p = tmp_path / "stats.tsv"
    write_run_stats(st_, net, p, header="# config: {}\n")
    rows = p.read_text().splitlines()
    assert rows[1] == "node\tdegree\tsource_updates"
    assert len(rows) == net.node_count + 2
    assert sum(int(r.split("\t")[2]) for r in rows[2:]) == 2000
