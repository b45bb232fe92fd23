import math

import numpy as np
import pytest

from conftest import corpus, pinv_resistance
from resistkit.errors import NetworkError, NotRealizableError, RealizabilityWarning
from resistkit.network import Network
from resistkit.resistance import (ball_complement_resistance,
                                  effective_resistance, fuse_network,
                                  fused_resistance, resistance_matrix,
                                  resistance_to_network, resistance_vector,
                                  set_resistance, trace_network,
                                  triangle_defect)

ATOL = 1e-9


# -- effective resistance -----------------------------------------------------------

def test_single_edge_is_inverse_conductance():
    net = Network.from_edges([(0, 1, 2.0)])
    assert np.isclose(effective_resistance(net, 0, 1), 0.5, atol=1e-12)


def test_triangle_pair(triangle):
    assert np.isclose(effective_resistance(triangle, 0, 2), 2 / 3, atol=1e-12)


def test_series_path(path3):
    assert np.isclose(effective_resistance(path3, 0, 2), 2.0, atol=1e-12)


def test_same_vertex_zero(path3):
    assert effective_resistance(path3, 1, 1) == 0.0


def test_unknown_vertex(path3):
    with pytest.raises(NetworkError):
        effective_resistance(path3, 0, 99)


def test_matches_pseudoinverse_oracle():
    for net in corpus(25, max_n=30):
        R = resistance_matrix(net).values
        assert np.abs(R - pinv_resistance(net)).max() < ATOL


def test_resistance_matrix_is_metric():
    for net in corpus(20, max_n=50):
        R = resistance_matrix(net)
        R.validate(atol=ATOL)
        assert triangle_defect(R.values) <= ATOL


# -- set and fused resistance ---------------------------------------------------------

def test_set_resistance_path_endpoints():
    net = Network.from_edges([(i, i + 1, 1.0) for i in range(3)])
    assert np.isclose(set_resistance(net, [0], [3]), 3.0, atol=1e-12)


def test_set_resistance_triangle_split(triangle):
    assert np.isclose(set_resistance(triangle, [0], [1, 2]), 0.5, atol=1e-12)


def test_set_resistance_star():
    k = 5
    net = Network.from_edges([("c", i, 1.0) for i in range(k)])
    assert np.isclose(set_resistance(net, ["c"], list(range(k))), 1 / k, atol=1e-12)


def test_set_resistance_rejects_overlap(triangle):
    with pytest.raises(NetworkError):
        set_resistance(triangle, [0, 1], [1, 2])
    with pytest.raises(NetworkError):
        set_resistance(triangle, [], [1])


def test_fused_resistance_leaf_fuse_is_identity(path3):
    # fusing a single leaf changes nothing on a tree; oracle via pseudoinverse
    assert np.isclose(fused_resistance(path3, [0], 1, 2),
                      pinv_resistance(path3)[1, 2], atol=ATOL)


def test_fused_resistance_single_point_equals_plain(triangle):
    assert np.isclose(fused_resistance(triangle, [0], 1, 2),
                      effective_resistance(triangle, 1, 2), atol=1e-12)


def test_fused_resistance_four_cycle_oracle():
    cyc = Network.from_edges([(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
    # oracle: build the fused network by hand and use the pseudoinverse
    fused = Network.from_edges([("a", 1, 2.0), ("a", 3, 2.0)], ids=["a", 1, 3],
                               root="a")
    oracle = pinv_resistance(fused)[1, 2]
    assert np.isclose(fused_resistance(cyc, [0, 2], 1, 3), oracle, atol=ATOL)


def test_fused_resistance_rejects_inside(triangle):
    with pytest.raises(NetworkError):
        fused_resistance(triangle, [0, 1], 1, 2)


def test_fused_resistance_never_exceeds_plain():
    for net in corpus(10, max_n=20, seed0=300):
        R = resistance_matrix(net).values
        ids = net.ids
        A = [ids[0], ids[net.n // 2]] if net.n > 2 else [ids[0]]
        rest = [v for v in ids if v not in set(A)]
        for y in rest[:3]:
            for z in rest[:3]:
                if y == z:
                    continue
                ry = fused_resistance(net, A, y, z)
                assert ry <= R[net.vertex_index(y), net.vertex_index(z)] + 1e-12


# -- fuse_network ----------------------------------------------------------------------

def test_fuse_parallel_pair():
    star = Network.from_edges([(0, 1, 1.0), (0, 2, 1.0)])
    fused = fuse_network(star, [[1, 2]])
    assert fused.n == 2
    assert np.isclose(effective_resistance(fused, 0, 1), 0.5, atol=1e-12)
    assert np.isclose(fused.total_mass(), star.total_mass())


def test_fuse_figure1_aux_block():
    from resistkit.ensembles import figure1_family
    n = 7
    net = figure1_family(n, "linear")
    aux = [n + 1 + i for i in range(n)]
    fused = fuse_network(net, [aux])
    # n parallel edges of conductance 1/n sum to conductance 1
    rep = aux[0]
    i, j = fused.vertex_index(0), fused.vertex_index(rep)
    assert np.isclose(fused.cond[i, j], 1.0, atol=1e-12)


def test_fuse_singleton_is_identity(triangle):
    fused = fuse_network(triangle, [[1]])
    assert fused.ids == triangle.ids
    assert (fused.cond != triangle.cond).nnz == 0
    assert np.array_equal(fused.mu, triangle.mu)


def test_fuse_rejects_overlap(triangle):
    with pytest.raises(NetworkError):
        fuse_network(triangle, [[0, 1], [1, 2]])


def test_fuse_shrinks_resistance():
    for net in corpus(10, max_n=25, seed0=400):
        R = resistance_matrix(net).values
        ids = net.ids
        parts = [[ids[0], ids[-1]]]
        if net.n >= 5:
            parts.append([ids[1], ids[2]])
        fused = fuse_network(net, parts)
        Rf = resistance_matrix(fused).values
        cls = {}
        for part in parts:
            rep = min(part, key=net.vertex_index)
            for v in part:
                cls[v] = rep
        fi = {v: k for k, v in enumerate(fused.ids)}
        for x in ids:
            for y in ids:
                px, py = cls.get(x, x), cls.get(y, y)
                assert Rf[fi[px], fi[py]] <= \
                    R[net.vertex_index(x), net.vertex_index(y)] + 1e-12


def test_fuse_drops_internal_edges(triangle):
    fused = fuse_network(triangle, [[0, 1]])
    assert fused.n == 2
    i, j = fused.vertex_index(0), fused.vertex_index(2)
    assert np.isclose(fused.cond[i, j], 2.0)  # two parallel unit edges
    assert fused.cond[i, i] == 0.0


# -- trace_network ----------------------------------------------------------------------

def test_trace_series_reduction(path3):
    traced = trace_network(path3, [0, 2], 1.0)
    assert traced.n == 2
    assert np.isclose(traced.cond[0, 1], 0.5, atol=1e-12)


def test_trace_triangle_two_vertices(triangle):
    traced = trace_network(triangle, [0, 2], 1.0)
    # Schur complement by hand: c = 3/2, R = 2/3
    assert np.isclose(traced.cond[0, 1], 1.5, atol=1e-12)
    assert np.isclose(effective_resistance(traced, 0, 2), 2 / 3, atol=1e-12)


def test_trace_onto_everything_is_identity(triangle):
    traced = trace_network(triangle, list(triangle.ids), triangle.mu)
    assert np.abs((traced.cond - triangle.cond).toarray()).max() < 1e-12


def test_trace_resistance_invariance():
    for net in corpus(12, max_n=30, seed0=500):
        ids = net.ids
        V = list(ids[: max(2, net.n // 2)])
        if net.root not in V:
            V.append(net.root)
        traced = trace_network(net, V, 1.0)
        for a in V[:4]:
            for b in V[:4]:
                if a == b:
                    continue
                assert np.isclose(effective_resistance(traced, a, b),
                                  effective_resistance(net, a, b), atol=ATOL)


def test_trace_rejects_bad_measure(path3):
    with pytest.raises(NetworkError):
        trace_network(path3, [0, 2], {0: 1.0, 2: 0.0})
    with pytest.raises(NetworkError):
        trace_network(path3, [], 1.0)


def test_trace_needs_root_in_subset(path3):
    with pytest.raises(NetworkError):
        trace_network(path3, [1, 2], 1.0)  # root 0 not in V, none designated
    traced = trace_network(path3, [1, 2], 1.0, root=2)
    assert traced.root == 2


# -- trace/fuse commutation -------------------------------------------------------------

def test_trace_fuse_commutation():
    rng = np.random.default_rng(7)
    for net in corpus(15, max_n=30, seed0=600):
        if net.n < 8:
            continue
        ids = list(net.ids)
        picks = rng.choice(net.n, size=6, replace=False)
        x, y, u1, v1, u2, v2 = (ids[i] for i in picks)
        V = [x, y, u1, v1, u2, v2]
        traced = trace_network(net, V, 1.0, root=x)
        tf = fuse_network(traced, [[u1, v1], [u2, v2]])
        ft = fuse_network(net, [[u1, v1], [u2, v2]])
        assert np.isclose(effective_resistance(tf, x, y),
                          effective_resistance(ft, x, y), atol=ATOL)


# -- resistance_to_network ---------------------------------------------------------------

def test_two_point_reconstruction():
    from resistkit.resistance import ResistanceMatrix
    R = ResistanceMatrix((0, 1), np.array([[0.0, 1.0], [1.0, 0.0]]))
    net = resistance_to_network(R, 0)
    assert np.isclose(net.cond[0, 1], 1.0, atol=1e-12)


def test_triangle_reconstruction_roundtrip(triangle):
    R = resistance_matrix(triangle)
    for base in triangle.ids:
        net2 = resistance_to_network(R, base)
        for x in triangle.ids:
            for y in triangle.ids:
                if x != y:
                    assert np.isclose(effective_resistance(net2, x, y),
                                      R.distance(x, y), atol=1e-9)


def test_path_metric_reconstruction():
    from resistkit.resistance import ResistanceMatrix
    ids = (0, 1, 2)
    vals = np.abs(np.subtract.outer(np.arange(3.0), np.arange(3.0)))
    net = resistance_to_network(ResistanceMatrix(ids, vals), 0)
    assert np.isclose(net.cond[net.vertex_index(0), net.vertex_index(1)], 1.0,
                      atol=1e-9)
    assert np.isclose(net.cond[net.vertex_index(1), net.vertex_index(2)], 1.0,
                      atol=1e-9)
    assert net.cond[net.vertex_index(0), net.vertex_index(2)] == 0.0


def test_roundtrip_conductances_every_base():
    import warnings as _w
    for net in corpus(15, max_n=20, seed0=700):
        R = resistance_matrix(net)
        dense = net.cond.toarray()
        for base in (net.ids[0], net.ids[-1]):
            with _w.catch_warnings():
                _w.simplefilter("ignore", RealizabilityWarning)
                net2 = resistance_to_network(R, base)
            dense2 = net2.cond.toarray()[np.ix_(
                [net2.vertex_index(v) for v in net.ids],
                [net2.vertex_index(v) for v in net.ids])]
            scale = dense.max()
            assert np.abs(dense2 - dense).max() <= 1e-6 * scale


def _stretched_path_metric(eps):
    """Path metric on 3 points with the long distance stretched past additivity.

    Reconstruction from base 1 then gives c(0,2) ~ -eps/2, so eps controls how
    negative the offending conductance is.
    """
    vals = np.array([[0.0, 1.0, 2.0 + eps],
                     [1.0, 0.0, 1.0],
                     [2.0 + eps, 1.0, 0.0]])
    from resistkit.resistance import ResistanceMatrix
    return ResistanceMatrix((0, 1, 2), vals)


def test_non_realizable_rejected():
    with pytest.raises(NotRealizableError):
        resistance_to_network(_stretched_path_metric(0.5), 1)


def test_slightly_negative_clamped_with_warning():
    with pytest.warns(RealizabilityWarning):
        net = resistance_to_network(_stretched_path_metric(1e-8), 1)
    assert net.n == 3
    assert net.cond[net.vertex_index(0), net.vertex_index(2)] == 0.0


# -- ball complement resistance ------------------------------------------------------------

def test_ball_complement_figure1_formula():
    from resistkit.ensembles import figure1_family
    net = figure1_family(12, "linear")
    for r in (0.5, 1.0, 2.5, 7.0, 11.5):
        expect = math.ceil(r) / (math.ceil(r) + 1)
        assert np.isclose(ball_complement_resistance(net, 0, r), expect,
                          atol=1e-12)


def test_ball_complement_unit_path():
    net = Network.from_edges([(i, i + 1, 1.0) for i in range(10)])
    assert np.isclose(ball_complement_resistance(net, 0, 3.0), 3.0, atol=1e-12)


def test_ball_complement_empty_is_infinite(triangle):
    assert ball_complement_resistance(triangle, 0, 10.0) == math.inf


def test_ball_complement_rejects_nonpositive_radius(triangle):
    with pytest.raises(NetworkError):
        ball_complement_resistance(triangle, 0, 0.0)


def test_resistance_vector_tree_fast_path_matches_dense():
    net = Network.from_edges([(i, i + 1, 1.0 + 0.1 * i) for i in range(9)])
    assert net.is_tree
    vec = resistance_vector(net, 3)
    R = pinv_resistance(net)
    assert np.abs(vec - R[3]).max() < ATOL
