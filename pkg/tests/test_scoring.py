import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from earlyrank.graph import FollowGraph
from earlyrank.imitation import FactorSet, cf_all
from earlyrank.scoring import (Ranking, ScoreConfig, default_g_param, early_adopter_score,
                               future_popularity_g, future_popularity_sum,
                               future_popularity_sum_union, imitation_ratio,
                               imitation_ratios, rank_accounts, rational_g_index,
                               score_targets)

from oracles import random_graph

U, V, W = 0, 1, 2


def triangle():
    return FollowGraph.build([(1, U, V), (2, W, U), (3, W, V)])


def brute_g(values, c):
    vals = sorted(values, reverse=True)
    g = 0
    while (g + 1) ** 2 <= c * sum(vals[:g + 1]):
        g += 1
    return g


# ---- imitation ratio / early-adopter scores --------------------------------

def test_imitation_ratio_examples():
    g = triangle()
    cf = cf_all(g)
    assert imitation_ratio(g, cf, U) == 1.0
    iso = FollowGraph.build([(1, 0, 1)], accounts=range(3))
    assert imitation_ratio(iso, [0.0, 0.0, 0.0], 2) == 0.0
    # u with 2 followers and 3 friends
    g = FollowGraph.build([(1, 0, 3), (2, 0, 4), (3, 0, 5), (4, 1, 0), (5, 2, 0)])
    assert imitation_ratio(g, [1.5] + [0.0] * 5, 0) == 0.25
    assert imitation_ratios(g, np.array([1.5] + [0.0] * 5))[0] == 0.25


def test_ratio_clamped():
    g = triangle()
    assert imitation_ratio(g, [1.0 + 1e-15, 0, 0], U) == 1.0
    assert imitation_ratios(g, np.array([1.0 + 1e-15, 0, 0]))[0] == 1.0


def test_early_adopter_variants():
    g = triangle()
    cf = cf_all(g)
    assert early_adopter_score(g, cf, U, V, "E1") == 0.0
    assert early_adopter_score(g, cf, U, V, "E2") == 1.0
    zero = [0.0, 0.0, 0.0]
    assert early_adopter_score(g, zero, U, V, "E1") == 0.0
    assert early_adopter_score(g, zero, U, V, "E2") == 0.0


def test_e1_counts_unshared_followers():
    # u has followers a, b, c; only c also follows v
    u, v, a, b, c = range(5)
    g = FollowGraph.build([(1, u, v), (2, a, u), (3, b, u), (4, c, u), (5, c, v)])
    cf = [3.0, 0, 0, 0, 0]
    assert early_adopter_score(g, cf, u, v, "E1") == 2.0


# ---- future popularity -----------------------------------------------------

def test_sum_examples():
    g = triangle()
    cf = cf_all(g)
    assert future_popularity_sum(g, cf, V, "E2") == 1.0
    assert future_popularity_sum(g, cf, W, "E2") == 0.0
    # v followed by two single-link accounts with I = 0.2 and 0.3
    v, a, b, x, y = range(5)
    g = FollowGraph.build([(1, a, v), (2, b, v), (3, x, a), (4, y, b)])
    assert future_popularity_sum(g, [0, 0.2, 0.3, 0, 0], v, "E2") == 0.5


def test_sum_union_examples():
    u, v, w = range(3)
    g = FollowGraph.build([(1, u, v), (2, w, u)])
    assert future_popularity_sum_union(g, [0.4, 0, 0], v) == 0.4
    u1, u2, v, w = range(4)
    g = FollowGraph.build([(1, u1, v), (2, u2, v), (3, w, u1), (4, w, u2)])
    assert future_popularity_sum_union(g, [0.5, 0.5, 0, 0], v) == 0.75
    assert future_popularity_sum_union(g, [0.0] * 4, v) == 0.0


def test_rational_g_index_examples():
    assert rational_g_index([4, 2, 1], 1) == pytest.approx(2.6, rel=1e-12)
    assert rational_g_index([1, 4, 2], 1) == rational_g_index([4, 2, 1], 1)
    assert rational_g_index([], 1) == 0.0
    assert rational_g_index([1], 1) == 1.0
    assert rational_g_index([0, 0, 0], 1) == 0.0


def test_rational_g_index_pads_with_zeros():
    # S = 9 for every g >= 1, so g = 3 > n and the fraction is 0
    assert rational_g_index([9], 1) == 3.0
    assert rational_g_index([5, 5], 2) == 4.0 + (20 - 16) / 9


@pytest.mark.parametrize("bad", [[-1.0], [math.nan], [math.inf]])
def test_rational_g_index_rejects(bad):
    with pytest.raises(ValueError):
        rational_g_index(bad, 1)


def test_rational_g_index_bad_c():
    with pytest.raises(ValueError):
        rational_g_index([1], 0)


def test_f_g_examples():
    v, u1, u2, u3 = range(4)
    # E1 follower scores 4, 2, 1: each u has I = 1 and that many outside followers
    edges = [(u1, v), (u2, v), (u3, v)]
    extra = 10
    for u, k in ((u1, 4), (u2, 2), (u3, 1)):
        for _ in range(k):
            edges.append((extra, u))
            extra += 1
    g = FollowGraph.build([(i + 1, a, b) for i, (a, b) in enumerate(edges)])
    cf = [0.0] * g.n
    cf[u1], cf[u2], cf[u3] = 4.0, 2.0, 1.0
    assert future_popularity_g(g, cf, v, "E1", c=1) == pytest.approx(2.6, rel=1e-12)
    assert future_popularity_g(g, [0.0] * g.n, v, "E1", c=1) == 0.0
    assert future_popularity_g(g, cf, 10, "E2", c=1) == 0.0


# ---- configuration and ranking ---------------------------------------------

def test_default_c_values():
    assert ScoreConfig("E2", "g_index").c == 1.0
    assert ScoreConfig("E2", "g_index", FactorSet(use_nonrec=True)).c == 10.0
    assert ScoreConfig("E1", "g_index", FactorSet(use_nonrec=True)).c == 100000.0
    assert ScoreConfig("E1", "g_index", FactorSet(use_sim=True)).c == 50000.0
    assert default_g_param("E2", FactorSet(True, True, True)) == 10.0
    assert ScoreConfig("E2", "g_index", g_param_c=3.0).c == 3.0


def test_config_validation():
    with pytest.raises(ValueError):
        ScoreConfig("E2", "sum_union")
    with pytest.raises(ValueError):
        ScoreConfig("E1", "g_index", g_param_c=0)
    with pytest.raises(ValueError):
        ScoreConfig.from_name("f3-sum")
    assert ScoreConfig.from_name("f2-sum", FactorSet(use_nonrec=True)).label == "f2-sum(r)"


def test_rank_triangle():
    g = triangle()
    r = rank_accounts(g, cf_all(g), [V], ScoreConfig("E2", "sum"))
    assert r.entries == [(V, 1.0)]


def test_rank_ties_and_empty():
    g = FollowGraph.build([(1, 7, 3), (2, 5, 3)], accounts=[3, 5, 7, 9])
    cf = np.zeros(g.n)
    r = rank_accounts(g, cf, [9, 7, 5], ScoreConfig())
    assert r.accounts == [5, 7, 9]
    assert len(rank_accounts(g, cf, [], ScoreConfig())) == 0


def test_rank_unknown_targets():
    g = triangle()
    with pytest.raises(KeyError, match="41, 42"):
        rank_accounts(g, cf_all(g), [V, 41, 42], ScoreConfig())


def test_ranking_roundtrip(tmp_path):
    r = Ranking.from_scores({4: 0.1, 2: 0.1, 9: 1 / 3}, "f2-sum(r)")
    r.write(tmp_path / "r.tsv")
    text = (tmp_path / "r.tsv").read_text().splitlines()
    assert text[0] == "# method=f2-sum(r)"
    assert text[1].split("\t")[:2] == ["1", "9"]
    back = Ranking.read(tmp_path / "r.tsv")
    assert back.entries == r.entries and back.method == r.method


def test_ranking_rejects_nan():
    with pytest.raises(ValueError):
        Ranking.from_scores({1: math.nan})


# ---- properties ------------------------------------------------------------

values = st.lists(st.floats(0, 100, allow_nan=False), max_size=60)
cs = st.floats(0.01, 10)


@settings(max_examples=200, deadline=None)
@given(values, cs)
def test_g_integer_part_matches_scan(vals, c):
    assert math.floor(rational_g_index(vals, c)) == brute_g(vals, c)


@settings(max_examples=200, deadline=None)
@given(values, cs, st.randoms())
def test_g_permutation_invariant(vals, c, rnd):
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    assert rational_g_index(shuffled, c) == rational_g_index(vals, c)


@settings(max_examples=200, deadline=None)
@given(values, cs, st.floats(1, 5))
def test_g_monotone_in_c(vals, c, factor):
    assert rational_g_index(vals, c * factor) >= rational_g_index(vals, c)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=60), cs,
       st.integers(0, 59), st.floats(0, 50))
def test_g_monotone_in_values(vals, c, i, bump):
    i %= len(vals)
    bigger = list(vals)
    bigger[i] += bump
    assert rational_g_index(bigger, c) >= rational_g_index(vals, c)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_ratio_bounds_and_sum_bound(seed):
    g = random_graph(random.Random(seed), max_nodes=25, max_edges=150)
    cf = cf_all(g, FactorSet(use_time=True))
    ratios = imitation_ratios(g, cf)
    assert ((ratios >= 0) & (ratios <= 1)).all()
    for v in range(g.n):
        assert future_popularity_sum(g, cf, v) <= g.in_degree(v)
        assert imitation_ratio(g, cf, v) == ratios[v]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 0.25, 0.125]))
def test_sum_scales_linearly(seed, lam):
    g = random_graph(random.Random(seed), max_nodes=25, max_edges=150)
    cf = cf_all(g)
    for v in range(g.n):
        for variant in ("E1", "E2"):
            assert (future_popularity_sum(g, cf * lam, v, variant)
                    == lam * future_popularity_sum(g, cf, v, variant))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 24), st.floats(0, 1))
def test_union_monotone_in_ratio(seed, u, bump):
    g = random_graph(random.Random(seed), max_nodes=25, max_edges=150)
    assume(u < g.n)
    cf = cf_all(g)
    raised = cf.copy()
    raised[u] += bump * g.in_degree(u) * g.out_degree(u)
    for v in range(g.n):
        assert (future_popularity_sum_union(g, raised, v)
                >= future_popularity_sum_union(g, cf, v))


def test_score_targets_agrees_with_single_functions():
    g = random_graph(random.Random(5), max_nodes=40, max_edges=400)
    cf = cf_all(g, FactorSet(use_nonrec=True))
    targets = list(range(g.n))
    for name in ("f1-sum", "f2-sum", "f1-g", "f2-g", "f1-sum-union"):
        config = ScoreConfig.from_name(name, FactorSet(use_nonrec=True))
        got = score_targets(g, cf, targets, config)
        for v in targets:
            if config.agg == "sum":
                want = future_popularity_sum(g, cf, v, config.e_variant)
            elif config.agg == "g_index":
                want = future_popularity_g(g, cf, v, config.e_variant, config.c)
            else:
                want = future_popularity_sum_union(g, cf, v)
            assert got[v] == want
