import itertools
import warnings

import numpy as np
import pytest

from radmm import _rng
from radmm.exceptions import InfeasibleGraphError, ParameterError
from radmm.graph import (Graph, complete_graph, cycle_graph, disjoint_union, geometric_graph,
                         is_connected, pair_diff, pair_sum, random_geometric, read_edgelist, swap,
                         write_edgelist)


def test_cycle_examples():
    assert cycle_graph(3).edges == ((0, 1), (0, 2), (1, 2))
    g = cycle_graph(10)
    assert np.all(g.degrees == 2)
    assert is_connected(g)


def test_cycle_two_warns():
    with pytest.warns(UserWarning):
        g = cycle_graph(2)
    assert g.edges == ((0, 1),)


@pytest.mark.parametrize("n", [1, 0, -3])
def test_cycle_rejects_small(n):
    with pytest.raises(ParameterError):
        cycle_graph(n)


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)]])
def test_graph_validation(edges):
    with pytest.raises(ParameterError):
        Graph(3, edges)


def test_is_connected_examples():
    assert is_connected(cycle_graph(5))
    assert not is_connected(Graph(4, [(0, 1), (2, 3)]))
    assert is_connected(complete_graph(6))


def test_slot_layout():
    g = Graph(4, [(0, 1), (1, 2), (1, 3), (2, 3)])
    assert g.n_slots == 8
    assert np.all(np.diff(g.src) >= 0)
    for e in range(g.n_slots):
        i, j = g.src[e], g.dst[e]
        assert g.slot(i, j) == e
        assert g.src[g.mate[e]] == j and g.dst[g.mate[e]] == i
        assert g.mate[g.mate[e]] == e
    assert g.slots_from(1) == [g.slot(1, j) for j in (0, 2, 3)]
    assert g.slots_into(1) == [g.slot(j, 1) for j in (0, 2, 3)]
    with pytest.raises(KeyError):
        g.slot(0, 3)
    with pytest.raises(ValueError):
        g.src[0] = 3


def test_random_geometric_large_radius_is_complete():
    g = random_geometric(10, 1.5, seed=4)
    assert g == complete_graph(10)


def test_random_geometric_tiny_radius_infeasible():
    with pytest.raises(InfeasibleGraphError, match="n=10, radius=1e-06"):
        random_geometric(10, 1e-6, seed=0, max_retries=20)


def test_random_geometric_radius_point_one_exhausts():
    # ten points in the unit square essentially never connect at radius 0.1
    with pytest.raises(InfeasibleGraphError):
        random_geometric(10, 0.1, seed=0)


def test_random_geometric_deterministic_and_connected():
    for seed in range(20):
        g1, p1 = random_geometric(10, 0.5, seed, return_points=True)
        g2 = random_geometric(10, 0.5, seed)
        assert g1 == g2 and is_connected(g1)
        # edges are exactly the pairs closer than the radius
        want = {(i, j) for i, j in itertools.combinations(range(10), 2)
                if np.hypot(*(p1[i] - p1[j])) < 0.5}
        assert set(g1.edges) == want


def test_random_geometric_first_attempt_points():
    _, pts = random_geometric(5, 1.5, seed=9, return_points=True)
    assert np.array_equal(pts, _rng.generator(9, "rgg", 0).random((5, 2)))


def test_geometric_graph_strict_radius():
    g = geometric_graph([[0.0, 0.0], [0.5, 0.0]], 0.5)
    assert g.edges == ()


def test_pair_ops():
    g = Graph(2, [(0, 1)])
    t = np.zeros(2)
    t[g.slot(0, 1)], t[g.slot(1, 0)] = 1.0, 2.0
    assert pair_sum(g, t)[g.slot(0, 1)] == 3.0
    assert pair_diff(g, t)[g.slot(0, 1)] == -1.0
    assert np.array_equal(pair_sum(g, np.zeros(2)), np.zeros(2))


def test_swap_is_involution():
    g = random_geometric(10, 0.5, seed=1)
    t = np.random.default_rng(0).standard_normal((g.n_slots, 2))
    assert np.array_equal(swap(g, swap(g, t)), t)
    s, d = pair_sum(g, t), pair_diff(g, t)
    assert np.array_equal(swap(g, s), s)
    assert np.array_equal(swap(g, d), -d)
    assert np.allclose(0.5 * (s + d), t, atol=1e-15)


def test_disjoint_union():
    a, b = cycle_graph(3), Graph(2, [(0, 1)])
    u, off = disjoint_union([a, b])
    assert u.n_nodes == 5 and list(off) == [0, 3]
    assert u.edges == ((0, 1), (0, 2), (1, 2), (3, 4))
    assert np.array_equal(u.src[:a.n_slots], a.src)


def test_edgelist_round_trip(tmp_path):
    g = random_geometric(10, 0.5, seed=2)
    p = tmp_path / "g.txt"
    write_edgelist(g, p)
    assert read_edgelist(p) == g


def test_edgelist_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("3 4\n0 1\n")
    with pytest.raises(ValueError):
        read_edgelist(p)
    p.write_text("3\n0 1 2\n")
    with pytest.raises(ValueError):
        read_edgelist(p)


def test_splitmix64_reference_value():
    # first output of the SplitMix64 generator seeded with 0
    assert _rng.splitmix64(0) == 0xE220A8397B1DCDAF
    x = np.array([0, 1, 2**63], dtype=np.uint64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        got = _rng.splitmix64_array(x)
    assert [int(v) for v in got] == [_rng.splitmix64(int(v)) for v in x]


def test_keyed_uniform_order_free():
    keys = _rng.slot_keys(5, [0, 1, 2], [1, 2, 0])
    u = _rng.keyed_uniform(keys, 7)
    assert np.all((u >= 0) & (u < 1))
    assert np.array_equal(_rng.keyed_uniform(keys[::-1], 7), u[::-1])
    assert not np.array_equal(_rng.keyed_uniform(keys, 8), u)
