from fractions import Fraction

import numpy as np
import pytest

from radmm.agents import SyncNetwork
from radmm.consensus import (Alg1State, Alg2State, LossModel, admm_step, alg1_state_from_z,
                             alg1_step, alg1_zero_state, alg2_primal, alg2_state_from_alg1,
                             alg2_step, alg2_zero_state, alg3_step, resource_counts,
                             sample_loss_mask)
from radmm.costs import QuadraticCost, centralized_optimum, make_random_quadratics
from radmm.exceptions import ParameterError
from radmm.graph import Graph, cycle_graph, random_geometric


def problem(seed, n=10, dim=1):
    g = random_geometric(n, 0.5, seed)
    return g, make_random_quadratics(n, seed, dim=dim)


def naive_alg1(g, costs, alpha, rho, x, y, w):
    """Per-edge loop written straight from the update rules (oracle)."""
    y = {(int(i), int(j)): y[e] for e, (i, j) in enumerate(zip(g.src, g.dst))}
    w = {(int(i), int(j)): w[e] for e, (i, j) in enumerate(zip(g.src, g.dst))}
    y_new, w_new = {}, {}
    for (i, j) in y:
        y_new[i, j] = ((w[i, j] + w[j, i]) + 2 * alpha * rho * (x[i] + x[j])
                       - rho * (2 * alpha - 1) * (y[i, j] + y[j, i])) / (2 * rho)
        w_new[i, j] = 0.5 * ((w[i, j] - w[j, i]) + 2 * alpha * rho * (x[i] - x[j])
                             - rho * (2 * alpha - 1) * (y[i, j] - y[j, i]))
    x_new = []
    for i in range(g.n_nodes):
        s = sum(rho * y_new[i, j] - w_new[i, j] for j in g.neighbors[i])
        d = len(g.neighbors[i])
        x_new.append(np.linalg.solve(costs[i].Q + rho * d * np.eye(costs[i].dim), s - costs[i].b))
    order = list(zip(g.src.tolist(), g.dst.tolist()))
    return (np.array(x_new), np.array([y_new[e] for e in order]),
            np.array([w_new[e] for e in order]))


def naive_alg2(g, costs, alpha, rho, z):
    z = {(int(i), int(j)): z[e] for e, (i, j) in enumerate(zip(g.src, g.dst))}
    x = []
    for i in range(g.n_nodes):
        s = sum(z[j, i] for j in g.neighbors[i])
        d = len(g.neighbors[i])
        x.append(np.linalg.solve(costs[i].Q + rho * d * np.eye(costs[i].dim), s - costs[i].b))
    z_new = {}
    for (i, j) in z:
        q_ij = -z[j, i] + 2 * rho * x[i]  # sent by i, refreshes z_ij held at j
        z_new[i, j] = (1 - alpha) * z[i, j] + alpha * q_ij
    order = list(zip(g.src.tolist(), g.dst.tolist()))
    return np.array(x), np.array([z_new[e] for e in order])


# -- single-step oracles --------------------------------------------------------------


@pytest.mark.parametrize("dim", [1, 2])
def test_alg1_matches_naive_loop(dim):
    g, costs = problem(1, dim=dim)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((g.n_nodes, dim))
    y = rng.standard_normal((g.n_slots, dim))
    w = rng.standard_normal((g.n_slots, dim))
    st = alg1_step(Alg1State(x, y, w), g, costs, 0.7, 1.3)
    xn, yn, wn = naive_alg1(g, costs, 0.7, 1.3, x, y, w)
    assert np.allclose(st.y, yn, atol=1e-13)
    assert np.allclose(st.w, wn, atol=1e-13)
    assert np.allclose(st.x, xn, atol=1e-13)


@pytest.mark.parametrize("dim", [1, 2])
def test_alg2_matches_naive_loop(dim):
    g, costs = problem(2, dim=dim)
    z = np.random.default_rng(1).standard_normal((g.n_slots, dim))
    st, msgs = alg2_step(Alg2State(x=None, z=z), g, costs, 0.4, 2.0)
    xn, zn = naive_alg2(g, costs, 0.4, 2.0, z)
    assert np.allclose(st.x, xn, atol=1e-13)
    assert np.allclose(st.z, zn, atol=1e-13)
    assert len(msgs) == g.n_slots
    for m in msgs:
        want = -z[g.slot(m.receiver, m.sender)] + 2.0 * 2.0 * st.x[m.sender]
        assert np.allclose(m.payload, want, atol=1e-15)


def test_alg2_examples():
    g = Graph(2, [(0, 1)])
    zero = [QuadraticCost([[0.0]], [0.0])] * 2
    st, msgs = alg2_step(alg2_zero_state(g), g, zero, 0.5, 1.0)
    assert np.all(st.x == 0) and np.all(st.z == 0)
    assert all(np.all(m.payload == 0) for m in msgs)
    # z_ji = 0 and x_i = 1 with rho = 1 give q_{i->j} = 2: pick f with x_update = 1 at s = 0
    one = QuadraticCost([[0.0]], [-1.0])  # x = (0 + 1) / (0 + 1 * 1)
    st, msgs = alg2_step(alg2_zero_state(g), g, [one, one], 0.5, 1.0)
    assert st.x[0, 0] == 1.0
    assert msgs[0].payload[0] == 2.0


def test_alg2_expanded_recursion():
    g, costs = problem(3)
    z = np.random.default_rng(2).standard_normal((g.n_slots, 1))
    a, rho = 0.6, 0.8
    st, _ = alg2_step(Alg2State(None, z), g, costs, a, rho)
    for e in range(g.n_slots):
        i, j = g.src[e], g.dst[e]
        want = (1 - a) * z[e] - a * z[g.mate[e]] + 2 * a * rho * st.x[i]
        assert np.allclose(st.z[e], want, atol=1e-14)


def test_bad_parameters():
    g, costs = problem(0)
    with pytest.raises(ParameterError):
        alg2_step(alg2_zero_state(g), g, costs, 0.5, 0.0)
    with pytest.raises(ParameterError):
        alg1_step(alg1_zero_state(g), g, costs, 0.0, 1.0)


# -- reductions and equivalences --------------------------------------------------------


def test_half_alpha_is_classical_admm():
    g, costs = problem(4)
    rng = np.random.default_rng(3)
    st = alg1_state_from_z(g, costs, rng.standard_normal((g.n_slots, 1)), 1.5)
    for _ in range(50):
        ref = admm_step(st, g, costs, 1.5)
        st = alg1_step(st, g, costs, 0.5, 1.5)
        for a, b in ((ref.x, st.x), (ref.y, st.y), (ref.w, st.w)):
            assert np.max(np.abs(a - b)) <= 1e-12


@pytest.mark.parametrize("alpha,rho", [(0.3, 0.5), (0.5, 1.0), (0.9, 3.0), (1.0, 1.0)])
def test_alg1_alg2_trajectories_agree(alpha, rho):
    g, costs = problem(5, dim=2)
    z0 = np.random.default_rng(4).standard_normal((g.n_slots, 2))
    s1 = alg1_state_from_z(g, costs, z0, rho)
    s2 = alg2_state_from_alg1(s1, rho)
    assert np.allclose(s2.z, z0, atol=1e-15)
    for _ in range(100):
        s2, _ = alg2_step(s2, g, costs, alpha, rho)
        assert np.max(np.abs(s2.x - s1.x)) < 1e-10
        s1 = alg1_step(s1, g, costs, alpha, rho)


def test_alg3_p0_bit_identical():
    g, costs = problem(6)
    loss = LossModel(0.0, seed=1)
    s2 = s3 = Alg2State(None, np.random.default_rng(5).standard_normal((g.n_slots, 1)))
    for k in range(200):
        s2, _ = alg2_step(s2, g, costs, 0.8, 1.0)
        s3 = alg3_step(s3, g, costs, 0.8, 1.0, loss, k)
        assert np.array_equal(s2.z, s3.z) and np.array_equal(s2.x, s3.x)


def test_alg3_p1_freezes():
    g, costs = problem(7)
    loss = LossModel(1.0, seed=1)
    z0 = np.random.default_rng(6).standard_normal((g.n_slots, 1))
    x0 = alg2_primal(g, costs, z0, 1.0)
    st = Alg2State(None, z0)
    for k in range(100):
        st = alg3_step(st, g, costs, 0.8, 1.0, loss, k)
        assert np.array_equal(st.z, z0) and np.array_equal(st.x, x0)


def test_alg3_gates_only_lost_slots():
    g, costs = problem(8)
    loss = LossModel(0.5, seed=3)
    z = np.random.default_rng(7).standard_normal((g.n_slots, 1))
    s3 = alg3_step(Alg2State(None, z), g, costs, 0.7, 1.0, loss, 4)
    s2, _ = alg2_step(Alg2State(None, z), g, costs, 0.7, 1.0)
    lost = sample_loss_mask(loss, 4, g)
    assert 0 < lost.sum() < g.n_slots
    assert np.array_equal(s3.z[lost], z[lost])
    assert np.array_equal(s3.z[~lost], s2.z[~lost])


def test_stochastic_km_form_float():
    # Alg 3 equals the KM step of the randomly gated operator L z + (I - L) T z
    g, costs = problem(9)
    loss = LossModel(0.4, seed=8)
    z = np.random.default_rng(8).standard_normal((g.n_slots, 1))
    a, rho = 0.35, 1.2
    x = alg2_primal(g, costs, z, rho)
    Tz = -z[g.mate] + 2 * rho * x[g.src]
    L = sample_loss_mask(loss, 0, g)[:, None]
    km_of_gated = (1 - a) * z + a * np.where(L, z, Tz)
    s3 = alg3_step(Alg2State(None, z), g, costs, a, rho, loss, 0)
    assert np.max(np.abs(s3.z - km_of_gated)) <= 4 * np.finfo(float).eps * np.max(np.abs(z))


def ordering_identity_holds(rng, n):
    """Both orderings in exact rational arithmetic on one random triple."""
    frac = lambda: Fraction(int(rng.integers(-1000, 1001)), int(rng.integers(1, 1000)))
    M = [[frac() for _ in range(n)] for _ in range(n)]
    c = [frac() for _ in range(n)]
    z = [frac() for _ in range(n)]
    L = [int(v) for v in rng.integers(0, 2, n)]
    a = Fraction(int(rng.integers(1, 100)), 100)
    Tz = [sum(M[r][s] * z[s] for s in range(n)) + c[r] for r in range(n)]
    first = [(1 - a) * z[r] + a * (L[r] * z[r] + (1 - L[r]) * Tz[r]) for r in range(n)]
    second = [L[r] * z[r] + (1 - L[r]) * ((1 - a) * z[r] + a * Tz[r]) for r in range(n)]
    return first == second


def test_ordering_identity_exact():
    rng = np.random.default_rng(9)
    assert all(ordering_identity_holds(rng, int(rng.integers(1, 8))) for _ in range(200))


# -- loss model ---------------------------------------------------------------


def test_loss_extremes():
    g = cycle_graph(6)
    assert not sample_loss_mask(LossModel(0.0, 1), 3, g).any()
    assert sample_loss_mask(LossModel(1.0, 1), 3, g).all()


def test_loss_frequency():
    g = cycle_graph(10)  # 20 directed slots
    loss = LossModel(0.3, seed=42)
    hits = sum(int(sample_loss_mask(loss, k, g).sum()) for k in range(5000))
    assert abs(hits / 1e5 - 0.3) < 0.01


def test_loss_per_edge_map():
    g = cycle_graph(4)
    loss = LossModel({(0, 1): 1.0, (2, 1): 0.0}, seed=0, default=0.5)
    probs = loss.probabilities(g)
    assert probs[g.slot(0, 1)] == 1.0 and probs[g.slot(2, 1)] == 0.0
    assert probs[g.slot(1, 0)] == 0.5
    for k in range(20):
        m = sample_loss_mask(loss, k, g)
        assert m[g.slot(0, 1)] and not m[g.slot(2, 1)]


@pytest.mark.parametrize("p", [-0.1, 1.5, {(0, 1): 2.0}])
def test_loss_rejects_probability(p):
    with pytest.raises(ParameterError):
        LossModel(p)


def test_loss_keyed_by_seed_k_i_j():
    g = cycle_graph(5)
    a = sample_loss_mask(LossModel(0.5, 3), 10, g)
    b = sample_loss_mask(LossModel(0.5, 3), 10, g)
    assert np.array_equal(a, b)
    masks = [sample_loss_mask(LossModel(0.5, 3), k, g) for k in range(20)]
    assert len({m.tobytes() for m in masks}) > 1


# -- fixed points and small cases ---------------------------------------------------------------


def test_alg1_fixed_point():
    g, costs = problem(10)
    rho, a = 1.0, 0.5
    st = alg2_zero_state(g)
    for _ in range(3000):
        st, _ = alg2_step(st, g, costs, a, rho)
    x_star = centralized_optimum(costs)
    assert np.max(np.abs(st.x - x_star)) < 1e-12
    s1 = alg1_state_from_z(g, costs, st.z, rho)
    nxt = alg1_step(s1, g, costs, a, rho)
    for u, v in ((s1.x, nxt.x), (s1.y, nxt.y), (s1.w, nxt.w)):
        assert np.max(np.abs(u - v)) < 1e-10
    assert np.allclose(s1.y, x_star, atol=1e-10)
    assert np.allclose(s1.w, -s1.w[g.mate], atol=0)


def test_two_node_path_converges_to_zero():
    g = Graph(2, [(0, 1)])
    costs = [QuadraticCost.from_scalar(1.0, 0.0)] * 2
    rng = np.random.default_rng(10)
    st = Alg2State(None, rng.standard_normal((2, 1)) * 10)
    for _ in range(400):
        st, _ = alg2_step(st, g, costs, 0.5, 1.0)
    assert np.max(np.abs(st.x)) < 1e-12


def test_consensus_at_convergence():
    g, costs = problem(11)
    x_star = centralized_optimum(costs)
    st = alg2_zero_state(g)
    for _ in range(2000):
        st, _ = alg2_step(st, g, costs, 0.9, 1.0)
    tol = 1e-8
    assert np.max(np.abs(st.x - x_star)) / np.linalg.norm(x_star) < tol
    assert np.ptp(st.x) < tol * np.linalg.norm(x_star)


# -- counts, locality and the agent simulator ----------------------------------------------------


def test_resource_count_examples():
    assert resource_counts(1, 3) == (7, 9)
    assert resource_counts(2, 3) == (4, 3)
    assert resource_counts(3, 3) == (4, 3)
    assert resource_counts(2, 1) == (2, 1)
    with pytest.raises(ParameterError):
        resource_counts(2, 0)
    with pytest.raises(ParameterError):
        resource_counts(4, 2)


def test_agents_counts_match_table():
    for seed in range(5):
        g, costs = problem(seed)
        for variant, init in ((1, alg1_zero_state), (2, alg2_zero_state)):
            net = SyncNetwork(g, costs, 0.5, 1.0, variant=variant)
            (net.init_alg1 if variant == 1 else net.init_alg2)(init(g))
            net.run(2)
            for i, got in enumerate(net.measured_counts()):
                assert got == resource_counts(variant, len(g.neighbors[i]))


@pytest.mark.parametrize("variant", [1, 2, 3])
def test_agents_match_vectorised_and_stay_local(variant):
    g, costs = problem(12, dim=2)
    alpha, rho = 0.7, 1.5
    z0 = np.random.default_rng(11).standard_normal((g.n_slots, 2))
    loss = LossModel(0.4, seed=5) if variant == 3 else None
    net = SyncNetwork(g, costs, alpha, rho, variant=variant, loss=loss)
    s1 = alg1_state_from_z(g, costs, z0, rho)
    s2 = Alg2State(None, z0)
    if variant == 1:
        net.init_alg1(s1)
    else:
        net.init_alg2(s2)
    for k in range(30):
        x_net = net.step()
        if variant == 1:
            s1 = alg1_step(s1, g, costs, alpha, rho)
            want = s1.x
        elif variant == 2:
            s2, _ = alg2_step(s2, g, costs, alpha, rho)
            want = s2.x
        else:
            s2 = alg3_step(s2, g, costs, alpha, rho, loss, k)
            want = s2.x
        assert np.allclose(x_net, want, atol=1e-12)
    assert net.foreign_reads == []
