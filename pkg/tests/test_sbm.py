import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netseg import DegenerateParamsError, count_wedges, integration, make_rng
from netseg.mc import mean_ci
from netseg.sbm import (
    MomentSums,
    SbmParams,
    absolute_effect_sign,
    centrality_analysis,
    closure_effect_samples,
    expected_adjacency,
    expected_counts,
    expected_counts_exact,
    measured_centrality_ratio,
    moment_inequalities,
    power_iteration,
    relative_bounds,
    sample_sbm,
)


def brute_force_expected_counts(params):
    """Sum existence probabilities over every pair and mediator triple."""
    types = params.node_types()
    n = len(types)

    def link_p(i, j):
        return params.p if types[i] == types[j] else params.q

    e_m = e_b = o_m = o_b = w_m = w_b = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            pij = link_p(i, j)
            if types[i] == types[j]:
                e_m += pij
                o_m += 1 - pij
            else:
                e_b += pij
                o_b += 1 - pij
            for h in range(n):
                if h in (i, j):
                    continue
                w = link_p(i, h) * link_p(h, j) * (1 - pij)
                if types[i] == types[j]:
                    w_m += w
                else:
                    w_b += w
    return e_m, e_b, o_m, o_b, w_m, w_b


class TestMomentSums:
    def test_values(self):
        ms = MomentSums.from_sizes([1, 2, 3])
        assert (ms.n, ms.m2, ms.m3) == (6, 14, 36)
        assert ms.A == 36 - 14
        assert ms.B == 6 * 14 - 36
        assert ms.C == ms.m3 * ms.A - ms.m2 * ms.B

    def test_nonnegative_combinations(self):
        for sizes in ([1, 2, 3], [5, 5], [10, 1, 1, 7]):
            ms = MomentSums.from_sizes(sizes)
            assert min(ms.A, ms.B, ms.C) >= 0


class TestMomentInequalities:
    def test_example_vectors(self):
        assert moment_inequalities([1, 2, 3]) == [True] * 5
        assert moment_inequalities([5, 5]) == [True] * 5

    @given(st.lists(st.integers(min_value=1, max_value=1000),
                    min_size=1, max_size=8))
    @settings(max_examples=300, deadline=None)
    def test_hold_for_random_sizes(self, sizes):
        assert all(moment_inequalities(sizes))


class TestExpectedCounts:
    def test_exact_small_case(self):
        # n_k = [2, 2], p = q = 1: every pair present
        c = expected_counts_exact(SbmParams((2, 2), 1.0, 1.0))
        assert c.e_m == 2 and c.e_b == 4
        assert c.o_m == 0 and c.o_b == 0
        assert c.w_m == 0 and c.w_b == 0  # no missing pair to close

    @pytest.mark.parametrize("p,q", [(0.2, 0.1), (0.5, 0.5), (0.05, 0.3)])
    def test_exact_matches_brute_force(self, p, q):
        params = SbmParams((8, 8), p, q)
        got = expected_counts_exact(params)
        want = brute_force_expected_counts(params)
        for g, w in zip((got.e_m, got.e_b, got.o_m, got.o_b, got.w_m, got.w_b),
                        want):
            assert g == pytest.approx(w, rel=1e-12, abs=1e-9)

    def test_exact_matches_brute_force_three_groups(self):
        params = SbmParams((5, 7, 4), 0.3, 0.15)
        got = expected_counts_exact(params)
        want = brute_force_expected_counts(params)
        for g, w in zip((got.e_m, got.e_b, got.o_m, got.o_b, got.w_m, got.w_b),
                        want):
            assert g == pytest.approx(w, rel=1e-12, abs=1e-9)

    def test_leading_order_approaches_exact(self):
        params = SbmParams((400, 400), 0.2, 0.1)
        lead = expected_counts(params)
        exact = expected_counts_exact(params)
        assert lead.e_m == pytest.approx(exact.e_m, rel=5e-3)
        assert lead.w_m == pytest.approx(exact.w_m, rel=2e-2)
        assert lead.w_b == pytest.approx(exact.w_b, rel=2e-2)

    def test_pair_totals_invariant(self):
        params = SbmParams((30, 50, 20), 0.4, 0.2)
        c = expected_counts(params)
        ms = MomentSums.from_sizes(params.group_sizes)
        assert c.e_m + c.o_m == pytest.approx(ms.m2 / 2)
        assert c.e_b + c.o_b == pytest.approx((ms.n ** 2 - ms.m2) / 2)

    def test_wedge_edge_ratios_match_at_equal_probabilities(self):
        c = expected_counts(SbmParams((40, 70), 0.25, 0.25))
        assert c.w_b / c.w_m == pytest.approx(c.e_b / c.e_m, rel=1e-12)

    def test_monte_carlo_means(self):
        params = SbmParams((60, 60), 0.2, 0.1)
        exact = expected_counts_exact(params)
        rng = make_rng(17)
        n_samp = 120
        em = np.empty(n_samp)
        eb = np.empty(n_samp)
        wm = np.empty(n_samp)
        wb = np.empty(n_samp)
        for i in range(n_samp):
            g = sample_sbm(params, rng)
            s = integration(g)
            w = count_wedges(g)
            em[i], eb[i] = s.mono_edges, s.bi_edges
            wm[i], wb[i] = w.mono_wedges, w.bi_wedges
        for arr, want in ((em, exact.e_m), (eb, exact.e_b),
                          (wm, exact.w_m), (wb, exact.w_b)):
            m = arr.mean()
            se = arr.std(ddof=1) / math.sqrt(n_samp)
            assert abs(m - want) <= 3 * se + 1e-9, (m, want, se)


class TestAbsoluteEffectSign:
    @pytest.mark.parametrize("p,q,want", [
        (0.2, 0.1, "positive"),
        (0.15, 0.15, "neutral"),
        (0.05, 0.2, "negative"),
    ])
    def test_reduces_to_probability_comparison(self, p, q, want):
        assert absolute_effect_sign(SbmParams((100, 100), p, q)) == want

    def test_unbalanced_groups(self):
        assert absolute_effect_sign(SbmParams((300, 50), 0.3, 0.1)) == "positive"
        assert absolute_effect_sign(SbmParams((300, 50, 20), 0.1, 0.3)) == "negative"

    def test_scale_invariance(self):
        for p, q in ((0.2, 0.1), (0.1, 0.25)):
            small = absolute_effect_sign(SbmParams((40, 60), p, q))
            large = absolute_effect_sign(SbmParams((400, 600), p, q))
            assert small == large

    def test_no_edges_signal(self):
        with pytest.raises(DegenerateParamsError):
            absolute_effect_sign(SbmParams((10, 10), 0.0, 0.0))


class TestRelativeBounds:
    def test_gamma_one_band(self):
        params = SbmParams((20, 40, 80), 0.2, 0.1)
        b = relative_bounds(params, 1.0)
        assert b.upper == pytest.approx(1.0, abs=1e-12)
        assert b.lower == pytest.approx(b.l_star, abs=1e-12)

    def test_balanced_l_star_is_exactly_one(self):
        for k in (2, 3, 5):
            b = relative_bounds(SbmParams((25,) * k, 0.3, 0.2), 2.5)
            assert b.l_star == 1.0

    def test_band_contains_one(self):
        rng = make_rng(3)
        for _ in range(40):
            sizes = tuple(int(x) for x in rng.integers(5, 200, size=rng.integers(2, 6)))
            gamma = float(rng.uniform(1.0, 8.0))
            b = relative_bounds(SbmParams(sizes, 0.5, 0.3), gamma)
            assert b.lower <= 1.0 + 1e-12
            assert b.upper >= 1.0 - 1e-12

    def test_upper_nondecreasing_in_gamma(self):
        params = SbmParams((20, 40), 0.2, 0.1)
        uppers = [relative_bounds(params, g).upper for g in (1, 1.5, 2, 3, 5, 8)]
        assert all(b >= a - 1e-12 for a, b in zip(uppers, uppers[1:]))

    def test_upper_grows_with_group_count_balanced(self):
        uppers = [relative_bounds(SbmParams((30,) * k, 0.2, 0.1), 3.0).upper
                  for k in range(2, 7)]
        assert all(b >= a - 1e-12 for a, b in zip(uppers, uppers[1:]))

    def test_single_group_degenerate(self):
        # one nonempty group makes m3 * A vanish; unreachable through
        # validated params, so exercise the guard with a bare stand-in
        from types import SimpleNamespace
        fake = SimpleNamespace(group_sizes=(50,), p=0.2, q=0.1)
        with pytest.raises(DegenerateParamsError):
            relative_bounds(fake, 2.0)

    def test_gamma_below_one_rejected(self):
        with pytest.raises(ValueError):
            relative_bounds(SbmParams((10, 10), 0.2, 0.1), 0.5)


class TestCentralityAnalysis:
    def test_balanced_groups_are_symmetric(self):
        r = centrality_analysis(SbmParams((80, 80), 0.3, 0.1))
        assert r.ratio_before == pytest.approx(1.0)
        assert r.delta_tc == pytest.approx(0.0, abs=1e-15)

    def test_correction_sign_tracks_homophily(self):
        up = centrality_analysis(SbmParams((150, 50), 0.2, 0.1))
        down = centrality_analysis(SbmParams((150, 50), 0.1, 0.2))
        assert up.delta_tc > 0
        assert down.delta_tc < 0

    def test_threshold_factor_bounds(self):
        grid = np.linspace(0.05, 0.9, 5)
        for p in grid:
            for q in grid:
                r = centrality_analysis(SbmParams((120, 40), max(p, 1e-2), q))
                c = r.gamma_threshold * q / max(p, 1e-2)
                assert c <= 1.0 + 1e-12
                if p > q:
                    assert r.gamma_threshold > 1.0
                elif p < q:
                    assert r.gamma_threshold < 1.0 + 1e-12

    def test_dense_eigensolver_oracle(self):
        params = SbmParams((750, 250), 0.2, 0.1)
        a = expected_adjacency(params)
        vals, vecs = np.linalg.eigh(a)
        v = vecs[:, -1]
        if v.sum() < 0:
            v = -v
        ratio = v[750:].mean() / v[:750].mean()
        r = centrality_analysis(params)
        assert ratio == pytest.approx(r.ratio_before, rel=0.01)

    def test_requires_two_groups_and_order(self):
        with pytest.raises(ValueError):
            centrality_analysis(SbmParams((10, 10, 10), 0.2, 0.1))
        with pytest.raises(ValueError):
            centrality_analysis(SbmParams((10, 20), 0.2, 0.1))

    def test_degenerate_q(self):
        with pytest.raises(DegenerateParamsError):
            centrality_analysis(SbmParams((20, 10), 0.2, 0.0))


class TestMeasuredCentrality:
    def test_complete_balanced_graph(self):
        from netseg import complete_graph
        g = complete_graph([0, 0, 1, 1])
        assert measured_centrality_ratio(g) == pytest.approx(1.0, abs=1e-9)

    def test_two_node_edge(self):
        from netseg import TypedGraph
        g = TypedGraph([0, 1], [(0, 1)])
        assert measured_centrality_ratio(g) == pytest.approx(1.0, abs=1e-9)

    def test_sampled_graphs_match_closed_form(self):
        params = SbmParams((160, 40), 0.2, 0.1)
        want = centrality_analysis(params).ratio_before
        rng = make_rng(11)
        ratios = [measured_centrality_ratio(sample_sbm(params, rng))
                  for _ in range(30)]
        assert np.mean(ratios) == pytest.approx(want, rel=0.05)

    def test_power_iteration_residual(self):
        params = SbmParams((60, 40), 0.3, 0.1)
        a = expected_adjacency(params)
        lam, v = power_iteration(a)
        assert np.linalg.norm(a @ v - lam * v) <= 1e-10 * max(1.0, lam)


class TestSampling:
    def test_deterministic_limits(self):
        g = sample_sbm(SbmParams((3, 3), 1.0, 0.0), 0)
        assert g.edge_count == 6  # two disjoint triangles
        comps = {frozenset({i} | set(g.neighbors(i))) for i in range(6)}
        assert comps == {frozenset({0, 1, 2}), frozenset({3, 4, 5})}
        empty = sample_sbm(SbmParams((4, 4), 0.0, 0.0), 0)
        assert empty.edge_count == 0

    def test_edge_count_mean(self):
        params = SbmParams((100, 100), 0.3, 0.1)
        rng = make_rng(23)
        counts = [sample_sbm(params, rng).edge_count for _ in range(60)]
        exact = expected_counts_exact(params)
        se = np.std(counts, ddof=1) / math.sqrt(len(counts))
        assert abs(np.mean(counts) - exact.edge_total) <= 3 * se

    def test_closure_samples_reproducible(self):
        params = SbmParams((40, 40), 0.2, 0.1)
        a = closure_effect_samples(params, 50, 7)
        b = closure_effect_samples(params, 50, 7)
        assert np.array_equal(a, b)


def test_mean_ci_basic():
    m, h = mean_ci(np.ones(100), 0.99)
    assert m == 1.0 and h == 0.0
    m, h = mean_ci([0.0, 1.0], 0.99)
    assert m == 0.5 and h > 0
