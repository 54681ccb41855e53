from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from etconsensus import graph as gr
from etconsensus import scenarios as S


def adjacency_matrices(n_min=2, n_max=6):
    return st.integers(n_min, n_max).flatmap(
        lambda n: arrays(float, (n, n), elements=st.sampled_from([0.0, 0.0, 0.5, 1.0, 2.0, 3.25]))
    ).map(lambda a: a * (1 - np.eye(len(a))))


def balanced_matrices():
    # sums of weighted cycles are weight-balanced
    def build(args):
        n, cycles = args
        a = np.zeros((n, n))
        for perm, w in cycles:
            for k in range(len(perm)):
                i, j = perm[k], perm[(k + 1) % len(perm)]
                a[i, j] += w
        return a

    return st.integers(2, 6).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(
                st.tuples(st.permutations(range(n)), st.floats(0.1, 3.0)),
                min_size=1,
                max_size=3,
            ),
        )
    ).map(build)


# -- construction -------------------------------------------------------------


def test_rejects_negative_weight_and_selfloop():
    with pytest.raises(gr.GraphError):
        gr.WeightedDigraph([[0, -1], [1, 0]])
    with pytest.raises(gr.GraphError):
        gr.WeightedDigraph([[1, 1], [1, 0]])
    with pytest.raises(gr.GraphError):
        gr.WeightedDigraph([[0, 1, 0], [1, 0, 1]])


def test_weight_bounds_enforced():
    gr.WeightedDigraph([[0, 1], [2, 0]], weight_bounds=(1, 2))
    with pytest.raises(gr.GraphError):
        gr.WeightedDigraph([[0, 1], [3, 0]], weight_bounds=(1, 2))


def test_adjacency_is_read_only():
    g = gr.ring(3)
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = 5.0


# -- laplacian ----------------------------------------------------------------


def test_laplacian_pair():
    g = gr.WeightedDigraph([[0, 1], [1, 0]])
    np.testing.assert_array_equal(gr.laplacian(g), [[1, -1], [-1, 1]])


def test_laplacian_directed_ring():
    lap = gr.laplacian(gr.ring(5, directed=True))
    np.testing.assert_array_equal(np.diag(lap), np.ones(5))
    assert all((row == -1).sum() == 1 for row in lap)
    np.testing.assert_array_equal(lap.sum(axis=1), np.zeros(5))


def test_laplacian_random_rows_sum_to_zero(rng):
    a = rng.uniform(0, 2, (4, 4)) * (rng.uniform(size=(4, 4)) < 0.6)
    np.fill_diagonal(a, 0)
    assert np.abs(gr.laplacian(gr.WeightedDigraph(a)).sum(axis=1)).max() < 1e-12


@given(adjacency_matrices())
def test_laplacian_annihilates_ones(a):
    assert np.abs(gr.laplacian(gr.WeightedDigraph(a)) @ np.ones(len(a))).max() <= 1e-12


# -- balance ------------------------------------------------------------------


def test_balance_examples():
    assert gr.is_weight_balanced(gr.ring(5, directed=True))
    assert not gr.is_weight_balanced(gr.WeightedDigraph([[0, 1], [0, 0]]))
    assert gr.is_weight_balanced(gr.ring(5))


@given(adjacency_matrices())
def test_undirected_always_balanced(a):
    assert gr.is_weight_balanced(gr.WeightedDigraph(a + a.T))


@given(adjacency_matrices())
def test_balance_iff_column_sums_vanish(a):
    g = gr.WeightedDigraph(a)
    tol = 1e-9 * max(1.0, g.dout.max(), g.din.max())
    ones_lap = np.ones(len(a)) @ gr.laplacian(g)
    assert gr.is_weight_balanced(g) == (np.abs(ones_lap).max() <= tol)


@given(balanced_matrices())
def test_balanced_sym_laplacian_is_psd(a):
    g = gr.WeightedDigraph(a)
    assert gr.is_weight_balanced(g)
    assert np.linalg.eigvalsh(gr.sym(gr.laplacian(g))).min() >= -1e-10


@given(balanced_matrices())
def test_balanced_strongly_connected_has_positive_lambda2(a):
    g = gr.WeightedDigraph(a)
    if gr.is_strongly_connected(g):
        assert gr.spectral_summary(g).lambda2_hat > 0


@given(balanced_matrices(), st.randoms(use_true_random=False))
def test_spectral_summary_permutation_invariant(a, rnd):
    n = len(a)
    p = list(range(n))
    rnd.shuffle(p)
    perm = np.eye(n)[p]
    s1 = gr.spectral_summary(gr.WeightedDigraph(a))
    s2 = gr.spectral_summary(gr.WeightedDigraph(perm @ a @ perm.T))
    assert math.isclose(s1.lambda2_hat, s2.lambda2_hat, rel_tol=1e-9, abs_tol=1e-10)
    assert math.isclose(s1.laplacian_norm, s2.laplacian_norm, rel_tol=1e-9)
    np.testing.assert_allclose(np.sort(s1.dout), np.sort(s2.dout))


# -- connectivity -------------------------------------------------------------


def test_strong_connectivity_examples():
    assert gr.is_strongly_connected(gr.ring(5, directed=True))
    assert not gr.is_strongly_connected(gr.pair(5, 0, 1))
    assert not gr.is_strongly_connected(gr.edgeless(3))
    assert gr.is_strongly_connected(gr.edgeless(1))


def _reachable_all(a):
    # plain BFS oracle, independent of the scipy-based implementation
    n = len(a)
    for src in range(n):
        seen, todo = {src}, [src]
        while todo:
            u = todo.pop()
            for w in range(n):
                if a[w, u] > 0 and w not in seen:
                    seen.add(w)
                    todo.append(w)
        if len(seen) != n:
            return False
    return True


@given(adjacency_matrices())
def test_strong_connectivity_matches_bfs(a):
    assert gr.is_strongly_connected(gr.WeightedDigraph(a)) == _reachable_all(a)


def test_joint_connectivity_rotating_pairs():
    sched = S.rotating_pairs_schedule()
    assert gr.is_jointly_strongly_connected(sched, 5.0, 15.0)
    # one pair alone is not enough
    assert not gr.is_jointly_strongly_connected(sched, 5.0, 7.0)
    # the pairs cover the undirected 5-cycle
    u = gr.union(sched.graphs[k] for k in range(1, 6))
    assert u == gr.ring(5)


def test_joint_connectivity_trivial_cases():
    const = gr.GraphSchedule.constant(gr.ring(4, directed=True), horizon=10)
    assert gr.is_jointly_strongly_connected(const, 1.0, 2.5)
    empty = gr.piecewise([(0, gr.edgeless(3)), (1, gr.edgeless(3))], horizon=5)
    assert not gr.is_jointly_strongly_connected(empty, 0.0, 5.0)
    with pytest.raises(gr.GraphError):
        gr.is_jointly_strongly_connected(const, 2.0, 2.0)


# -- spectra ------------------------------------------------------------------


def test_spectral_examples():
    c = math.cos(2 * math.pi / 5)
    assert math.isclose(gr.spectral_summary(gr.ring(5)).lambda2_hat, 2 * (1 - c), rel_tol=1e-12)
    assert math.isclose(gr.spectral_summary(gr.ring(5, directed=True)).lambda2_hat, 1 - c, rel_tol=1e-12)
    assert math.isclose(gr.spectral_summary(gr.complete(2)).lambda2_hat, 2.0, rel_tol=1e-12)


def test_spectral_rejects_unbalanced():
    with pytest.raises(gr.GraphError):
        gr.spectral_summary(gr.WeightedDigraph([[0, 1], [0, 0]]))


def test_schedule_extrema():
    g = gr.ring(5)
    ext = gr.schedule_extrema(gr.GraphSchedule.constant(g))
    summ = gr.spectral_summary(g)
    assert ext.laplacian_sup == summ.laplacian_norm
    assert ext.lambda2_inf == summ.lambda2_hat
    np.testing.assert_array_equal(ext.dout_sup, summ.dout)

    sched = S.rotating_pairs_schedule()
    expected = max(np.linalg.norm(gr.laplacian(gk), 2) for gk in sched.graphs)
    assert math.isclose(gr.schedule_extrema(sched).laplacian_sup, expected, rel_tol=1e-12)
    # ring norm 2, pair norm 2
    assert math.isclose(expected, 2.0, rel_tol=1e-12)

    two = gr.piecewise([(0, gr.ring(5, 1.0)), (1, gr.ring(5, 2.0))])
    np.testing.assert_array_equal(gr.schedule_extrema(two).dout_sup, 2 * gr.ring(5).dout)


def test_schedule_validation():
    g = gr.ring(3)
    with pytest.raises(gr.GraphError):
        gr.GraphSchedule((0.5,), (g,))
    with pytest.raises(gr.GraphError):
        gr.GraphSchedule((0.0, 2.0, 1.0), (g, g, g))
    with pytest.raises(gr.GraphError):
        gr.GraphSchedule((0.0, 1.0), (g, gr.ring(4)))
    with pytest.raises(gr.GraphError):
        gr.GraphSchedule((0.0, 1.0), (g, g), min_dwell=2.0)


def test_schedule_is_right_continuous():
    sched = gr.piecewise([(0, gr.ring(3)), (2, gr.edgeless(3))])
    assert sched.graph_at(1.999) == gr.ring(3)
    assert sched.graph_at(2.0) == gr.edgeless(3)


# -- acquisitions -------------------------------------------------------------


def _acquisition_oracle(sched):
    out = {}
    for k in range(1, len(sched.graphs)):
        before = sched.graphs[k - 1].edges()
        for (j, i) in sched.graphs[k].edges() - before:
            # edge (j, i): j listens to i, so i gains a listener
            out.setdefault(i, set()).add(sched.starts[k])
    return {i: sorted(ts) for i, ts in out.items()}


def test_acquisitions_constant_and_removal():
    assert gr.in_neighbor_acquisitions(gr.GraphSchedule.constant(gr.ring(4))) == {}
    sched = gr.piecewise([(0, gr.ring(5)), (3, gr.ring_minus_edge(5, 0, 1))])
    assert gr.in_neighbor_acquisitions(sched) == {}


def test_acquisitions_rotating_pairs():
    sched = S.rotating_pairs_schedule()
    acq = gr.in_neighbor_acquisitions(sched)
    assert acq == _acquisition_oracle(sched)
    # at t = 15 pair (4, 0) gives way to the directed ring; edge (4, 0) survives,
    # edges (i, i+1) appear for i < 4, so agents 1..4 gain a listener
    at15 = sorted(i for i, ts in acq.items() if 15.0 in ts)
    assert at15 == [1, 2, 3, 4]


@given(st.lists(adjacency_matrices(3, 3), min_size=2, max_size=4))
def test_acquisitions_match_edge_diff(mats):
    sched = gr.piecewise([(float(k), gr.WeightedDigraph(a)) for k, a in enumerate(mats)])
    assert gr.in_neighbor_acquisitions(sched) == _acquisition_oracle(sched)


# -- json ---------------------------------------------------------------------


def test_graph_json_round_trip():
    for g in (gr.ring(5), gr.ring(4, 2.0, directed=True), gr.pair(5, 1, 3), gr.complete(3)):
        assert gr.graph_from_dict(gr.graph_to_dict(g)) == g
    assert gr.graph_from_dict({"kind": "ring_minus_edge", "n": 5, "i": 0, "j": 1}) == gr.ring_minus_edge(5, 0, 1)


def test_schedule_json_round_trip():
    sched = S.rotating_pairs_schedule()
    back = gr.schedule_from_dict(gr.schedule_to_dict(sched), sched.horizon)
    assert back.starts == sched.starts
    assert all(a == b for a, b in zip(back.graphs, sched.graphs))
