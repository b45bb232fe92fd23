import math

import numpy as np
import pytest

from resistkit.ensembles import figure1_family
from resistkit.mmspace import (FiniteMMSpace, ball_boundary_ties, coarsen_space,
                               from_network, greedy_epsilon_net,
                               gromov_weak_moment, growth_condition_flag,
                               read_mmspace, resistance_growth_profile,
                               restrict_ball, write_mmspace)
from resistkit.network import Network
from resistkit.rng import SimulationConfig


def segment_space(n, root=0):
    D = np.abs(np.subtract.outer(np.arange(n, dtype=float),
                                 np.arange(n, dtype=float)))
    return FiniteMMSpace(tuple(range(n)), D, np.ones(n), root)


# -- from_network ----------------------------------------------------------------------

def test_from_network_two_point():
    net = Network.from_edges([(0, 1, 1.0)])
    sp = from_network(net)
    assert np.allclose(sp.metric, [[0, 1], [1, 0]])
    assert sp.root == 0


def test_from_network_triangle(triangle):
    sp = from_network(triangle)
    off = sp.metric[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 2 / 3)


def test_from_network_figure1_aux_distance():
    sp = from_network(figure1_family(3, "linear"))
    d = sp.metric[sp.root_index]
    for aux in (4, 5, 6):
        assert np.isclose(d[sp.point_index(aux)], 3.0)


def test_metric_validation():
    bad = np.array([[0.0, 5.0, 1.0], [5.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    sp = FiniteMMSpace((0, 1, 2), bad, np.ones(3), 0)
    with pytest.raises(ValueError, match="triangle"):
        sp.validate_metric()


# -- restrict_ball ----------------------------------------------------------------------

def test_restrict_identity_beyond_diameter():
    sp = segment_space(5)
    out = restrict_ball(sp, 10.0)
    assert out.ids == sp.ids


def test_restrict_zero_radius_is_root():
    sp = segment_space(5, root=2)
    out = restrict_ball(sp, 0.0)
    assert out.ids == (2,)
    assert out.root == 2


def test_restrict_threshold():
    sp = segment_space(11)
    out = restrict_ball(sp, 2.5)
    assert out.ids == (0, 1, 2)


def test_restrict_reports_ties():
    sp = segment_space(5)
    assert ball_boundary_ties(sp, 2.0) == [2]
    with pytest.warns(UserWarning, match="exactly"):
        restrict_ball(sp, 2.0)


def test_restrict_idempotent_and_monotone():
    sp = segment_space(9)
    a = restrict_ball(sp, 3.5)
    assert restrict_ball(a, 3.5).ids == a.ids
    b = restrict_ball(sp, 5.5)
    assert set(a.ids) <= set(b.ids)


# -- gromov_weak_moment --------------------------------------------------------------------

def test_moment_constant_function():
    sp = segment_space(4)
    assert np.isclose(gromov_weak_moment(sp, 2, lambda d: 1.0), 1.0)


def test_moment_two_point_expectation():
    sp = FiniteMMSpace((0, 1), np.array([[0.0, 1.0], [1.0, 0.0]]),
                       np.array([1.0, 1.0]), 0)
    val = gromov_weak_moment(sp, 1, lambda d: d[0])
    assert np.isclose(val, 0.5)


def test_moment_exact_vs_monte_carlo():
    rng = np.random.default_rng(9)
    pts = rng.random((6, 2))
    D = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
    sp = FiniteMMSpace(tuple(range(6)), D, rng.random(6) + 0.2, 0)
    f = lambda d: math.exp(-d.sum())
    exact = gromov_weak_moment(sp, 2, f)
    cfg = SimulationConfig(seed=2, n_samples=20_000)
    mc = gromov_weak_moment(sp, 2, f, cfg=cfg, n_samples=20_000)
    assert abs(exact - mc) < 3 * 0.5 / math.sqrt(20_000) + 0.01


def test_moment_relabel_invariance():
    rng = np.random.default_rng(3)
    pts = rng.random((5, 2))
    D = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
    w = rng.random(5) + 0.1
    sp = FiniteMMSpace(tuple(range(5)), D, w, 0)
    perm = [0, 3, 1, 4, 2]
    sp2 = FiniteMMSpace(tuple(range(5)), D[np.ix_(perm, perm)], w[perm], 0)
    f = lambda d: float(np.minimum(d, 1.0).mean())
    assert np.isclose(gromov_weak_moment(sp, 2, f),
                      gromov_weak_moment(sp2, 2, f), atol=1e-12)


# -- growth profiles -------------------------------------------------------------------------

def test_growth_profile_figure1_linear_plateaus_at_one():
    nets = [figure1_family(n, "linear") for n in (64, 128, 256)]
    radii = [1.5, 3.5, 7.5, 15.5, 31.5]
    rows, proxy = resistance_growth_profile(nets, radii)
    for r in radii:
        expect = math.ceil(r) / (math.ceil(r) + 1)
        assert np.isclose(proxy[r], expect, atol=1e-12)
    assert growth_condition_flag(proxy)  # plateaus at 1


def test_growth_profile_figure1_sqrt_grows():
    nets = [figure1_family(n, "sqrt") for n in (256, 1024, 4096)]
    radii = [1.5, 3.5, 7.5, 15.5, 31.5]
    rows, proxy = resistance_growth_profile(nets, radii)
    for r in radii:
        k = math.isqrt(4096)
        expect = 1.0 / (1.0 / math.ceil(r) + k / 4096)
        assert np.isclose(proxy[r], expect, atol=1e-9)
    assert not growth_condition_flag(proxy)


def test_growth_profile_unit_paths_exact():
    nets = [Network.from_edges([(i, i + 1, 1.0) for i in range(n)])
            for n in (32, 64)]
    radii = [1.5, 2.5, 7.5]
    rows, proxy = resistance_growth_profile(nets, radii)
    for row in rows:
        assert np.isclose(row["value"], math.ceil(row["r"]), atol=1e-12)


# -- nets and coarsening -----------------------------------------------------------------------

def test_greedy_net_covers():
    sp = segment_space(30)
    for eps in (0.8, 2.3, 5.0):
        centers = greedy_epsilon_net(sp.metric, eps)
        assert (sp.metric[centers].min(axis=0) < eps).all()


def test_coarsen_preserves_mass_and_root():
    sp = segment_space(50, root=7)
    c = coarsen_space(sp, 10)
    assert c.n == 10
    assert c.root == 7
    assert np.isclose(c.weights.sum(), sp.weights.sum())


# -- file round trip ----------------------------------------------------------------------------

def test_mmspace_file_roundtrip(tmp_path):
    sp = FiniteMMSpace((0, 1, 2),
                       np.array([[0.0, 1.25, 2.0],
                                 [1.25, 0.0, 1.0],
                                 [2.0, 1.0, 0.0]]),
                       np.array([0.5, 1.0, 2.0]), 1,
                       embedding=np.array([[0.0, 0.0], [1.0, 0.5], [2.0, 0.0]]))
    p = tmp_path / "space.txt"
    write_mmspace(sp, p)
    back = read_mmspace(p)
    assert back.ids == sp.ids
    assert back.root == 1
    assert np.array_equal(back.metric, sp.metric)
    assert np.array_equal(back.weights, sp.weights)
    assert np.array_equal(back.embedding, sp.embedding)
