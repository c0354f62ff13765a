import itertools

import numpy as np
import pytest
from scipy import stats as sps

from netseg import (
    BI,
    MONO,
    NoMissingEdgeError,
    NoWedgeError,
    TypedGraph,
    UndefinedIntegrationError,
    add_random_edge,
    close_random_wedge,
    complete_graph,
    count_wedges,
    enumerate_wedges,
    integration,
    make_rng,
    read_edge_list,
    read_graph_json,
    sample_wedge,
    write_edge_list,
    write_graph_json,
)


def brute_force_wedges(g):
    """Independent O(n^3) oracle: scan every (i, h, j) triple."""
    mono = bi = 0
    n = g.node_count
    for h in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                if i == h or j == h:
                    continue
                if g.has_edge(i, h) and g.has_edge(h, j) and not g.has_edge(i, j):
                    if g.node_types[i] == g.node_types[j]:
                        mono += 1
                    else:
                        bi += 1
    return mono, bi


def random_graph(n, k, p, seed):
    rng = make_rng(seed)
    types = rng.integers(0, k, size=n)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p]
    return TypedGraph(types, edges, K=k)


class TestTypedGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            TypedGraph([0, 0], [(0, 0)])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ValueError, match="duplicate"):
            TypedGraph([0, 0], [(0, 1), (1, 0)])

    def test_rejects_unknown_node(self):
        with pytest.raises(ValueError, match="unknown node"):
            TypedGraph([0, 0], [(0, 5)])

    def test_rejects_bad_type(self):
        with pytest.raises(ValueError, match="type id"):
            TypedGraph([0, 3], K=2)

    def test_directed_edges_and_undirected_view(self):
        g = TypedGraph([0, 1, 0], [(2, 0), (2, 1)], directed=True, K=2)
        assert g.has_arc(2, 0) and not g.has_arc(0, 2)
        assert g.has_edge(0, 2)
        assert g.neighbors(2) == {0, 1}
        assert g.out_neighbors(0) == frozenset()


class TestIntegration:
    def test_one_mono_one_bi(self):
        g = TypedGraph([0, 0, 1], [(0, 1), (0, 2)])
        stats = integration(g)
        assert (stats.mono_edges, stats.bi_edges) == (1, 1)
        assert stats.integration == 0.5

    def test_complete_single_type_is_zero(self):
        g = complete_graph([0] * 5)
        assert integration(g).integration == 0.0

    def test_empty_edge_set_is_undefined(self):
        with pytest.raises(UndefinedIntegrationError):
            integration(TypedGraph([0, 1]))

    def test_matches_per_edge_tally(self):
        g = random_graph(20, 2, 0.3, seed=5)
        stats = integration(g)
        mono = sum(1 for i, j in g.edges()
                   if g.node_types[i] == g.node_types[j])
        bi = g.edge_count - mono
        assert (stats.mono_edges, stats.bi_edges) == (mono, bi)
        assert stats.integration == bi / (mono + bi)


class TestCountWedges:
    def test_triangle_has_none(self):
        g = complete_graph([0, 0, 0])
        assert count_wedges(g).total == 0

    def test_star_three_leaves(self):
        g = TypedGraph([0, 0, 0, 0], [(0, 1), (0, 2), (0, 3)])
        w = count_wedges(g)
        assert (w.mono_wedges, w.bi_wedges) == (3, 0)

    def test_typed_path(self):
        g = TypedGraph([0, 0, 1], [(0, 1), (1, 2)])
        w = count_wedges(g)
        assert (w.mono_wedges, w.bi_wedges) == (0, 1)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force(self, seed):
        g = random_graph(24, 3, 0.2, seed=seed)
        w = count_wedges(g)
        assert (w.mono_wedges, w.bi_wedges) == brute_force_wedges(g)

    def test_directed_uses_undirected_structure(self):
        g = TypedGraph([0, 0, 1], [(2, 1), (1, 0)], directed=True, K=2)
        w = count_wedges(g)
        assert (w.mono_wedges, w.bi_wedges) == (0, 1)


class TestCloseRandomWedge:
    def test_single_wedge_path(self):
        g = TypedGraph([0, 0, 1], [(0, 1), (1, 2)])
        g2, color = close_random_wedge(g, 0)
        assert color == BI
        assert g2.has_edge(0, 2)
        assert integration(g).integration == 0.5
        assert integration(g2).integration == pytest.approx(2 / 3)

    def test_four_cycle_adds_one_edge(self):
        g = TypedGraph([0, 0, 0, 0], [(0, 1), (1, 2), (2, 3), (3, 0)])
        g2, color = close_random_wedge(g, 3)
        assert g2.edge_count == 5
        assert color == MONO
        assert g.edge_count == 4  # input untouched

    def test_no_wedge_signal(self):
        with pytest.raises(NoWedgeError):
            close_random_wedge(complete_graph([0, 1, 0]), 0)

    def test_never_duplicates_or_self_loops(self):
        g = random_graph(18, 2, 0.25, seed=2)
        for s in range(40):
            g2, _ = close_random_wedge(g, s)
            assert g2.edge_count == g.edge_count + 1

    def test_bichromatic_closure_increases_integration(self):
        g = random_graph(18, 2, 0.25, seed=9)
        for s in range(30):
            g2, color = close_random_wedge(g, s)
            before = integration(g).integration
            after = integration(g2).integration
            if color == BI and before < 1:
                assert after > before
            elif color == MONO:
                assert after < before or before == 0

    def test_selection_uniform_over_wedges(self):
        # fixed small graph with unequal mediator weights; a pair with two
        # common neighbors must close about twice as often
        g = TypedGraph([0, 0, 1, 1, 0],
                       [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 4)])
        wedges = enumerate_wedges(g)
        w = len(wedges)
        trials = 20_000
        rng = make_rng(999)
        counts = {wd: 0 for wd in wedges}
        for _ in range(trials):
            counts[sample_wedge(g, rng)] += 1
        observed = np.array([counts[wd] for wd in wedges])
        chi2 = ((observed - trials / w) ** 2 / (trials / w)).sum()
        p_value = sps.chi2.sf(chi2, w - 1)
        assert p_value > 0.001
        # 99% simultaneous binomial band
        z = sps.norm.ppf(1 - 0.01 / (2 * w))
        band = z * np.sqrt((1 / w) * (1 - 1 / w) / trials)
        assert np.all(np.abs(observed / trials - 1 / w) <= band)

    def test_rejection_matches_enumeration_frequencies(self):
        # chi-square of the sampler against the enumeration oracle on a
        # denser graph where rejections actually occur
        g = random_graph(30, 2, 0.3, seed=14)
        wedges = enumerate_wedges(g)
        idx = {wd: i for i, wd in enumerate(wedges)}
        rng = make_rng(7)
        trials = 10_000
        observed = np.zeros(len(wedges))
        for _ in range(trials):
            observed[idx[sample_wedge(g, rng)]] += 1
        expected = trials / len(wedges)
        chi2 = ((observed - expected) ** 2 / expected).sum()
        assert sps.chi2.sf(chi2, len(wedges) - 1) > 0.001


class TestAddRandomEdge:
    def test_uniform_when_gamma_one(self):
        # two mono + two bi missing pairs
        g = TypedGraph([0, 0, 0, 1, 1],
                       [(0, 1), (0, 2), (0, 3), (0, 4), (3, 4), (1, 4)])
        missing = [(1, 2), (2, 3), (2, 4), (1, 3)]
        rng = make_rng(21)
        counts = dict.fromkeys(missing, 0)
        trials = 8000
        for _ in range(trials):
            g2 = add_random_edge(g, 1.0, rng)
            new = next(e for e in g2.edges() if not g.has_edge(*e))
            counts[new] += 1
        for pair in missing:
            assert counts[pair] / trials == pytest.approx(0.25, abs=0.02)

    def test_gamma_two_prefers_mono(self):
        # one mono + one bi missing pair -> mono probability 2/3
        g = TypedGraph([0, 0, 1], [(0, 2)])
        rng = make_rng(5)
        trials = 9000
        mono = 0
        for _ in range(trials):
            g2 = add_random_edge(g, 2.0, rng)
            mono += g2.has_edge(0, 1)
        assert mono / trials == pytest.approx(2 / 3, abs=0.02)

    def test_large_gamma_limit(self):
        g = TypedGraph([0, 0, 1], [(0, 2)])
        rng = make_rng(6)
        for _ in range(50):
            g2 = add_random_edge(g, 1e12, rng)
            assert g2.has_edge(0, 1)

    def test_complete_graph_signal(self):
        with pytest.raises(NoMissingEdgeError):
            add_random_edge(complete_graph([0, 1, 0]), 1.0, 0)


class TestFileFormats:
    def test_edge_list_round_trip(self, tmp_path):
        g = random_graph(12, 3, 0.3, seed=4)
        path = tmp_path / "g.txt"
        write_edge_list(g, path)
        g2 = read_edge_list(path)
        assert np.array_equal(g.node_types, g2.node_types)
        assert sorted(g.edges()) == sorted(g2.edges())
        assert (g.directed, g.K) == (g2.directed, g2.K)

    def test_edge_list_header(self, tmp_path):
        g = TypedGraph([0, 1], [(0, 1)], directed=True, K=2)
        path = tmp_path / "g.txt"
        write_edge_list(g, path)
        assert path.read_text().splitlines()[0] == "directed K=2"

    def test_rejects_malformed(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("undirected K=2\nnode 0 0\nwhat 1 2\n")
        with pytest.raises(ValueError, match="bad line"):
            read_edge_list(path)

    def test_json_round_trip(self, tmp_path):
        g = random_graph(10, 2, 0.4, seed=8)
        path = tmp_path / "g.json"
        write_graph_json(g, path)
        g2 = read_graph_json(path)
        assert np.array_equal(g.node_types, g2.node_types)
        assert sorted(g.edges()) == sorted(g2.edges())


def test_wedge_enumeration_matches_counts():
    for seed in range(4):
        g = random_graph(16, 2, 0.3, seed=seed)
        wedges = enumerate_wedges(g)
        w = count_wedges(g)
        assert len(wedges) == w.total
        by_color = sum(1 for i, _, j in wedges
                       if g.node_types[i] == g.node_types[j])
        assert by_color == w.mono_wedges


def test_itertools_oracle_agreement():
    # a second, generator-based oracle formulation as a cross-check
    g = random_graph(14, 2, 0.35, seed=3)
    expect = sum(1 for i, j in itertools.combinations(range(g.node_count), 2)
                 if not g.has_edge(i, j)
                 for h in range(g.node_count)
                 if h not in (i, j) and g.has_edge(i, h) and g.has_edge(h, j))
    assert count_wedges(g).total == expect
