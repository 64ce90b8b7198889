import math

import numpy as np
import pytest

from dlab.purenet import (
    PureNet,
    build_net_greedy,
    certify_covering,
    convex_cover_distance,
    lemma1_bounds,
    octahedron_net,
    octahedron_radius,
    pure_distances,
)
from dlab.qcore import haar_vector, make_rng


def test_lemma1_arithmetic():
    b = lemma1_bounds(2, 0.25)
    assert b.log2_lower == pytest.approx(4.0)
    assert b.min_size == 16
    assert b.log2_upper == pytest.approx(4 + math.log2(10 * math.log(2)))
    assert lemma1_bounds(2, 0.46).min_size == 5
    assert lemma1_bounds(3, 0.5).log2_lower == pytest.approx(4.0)


@pytest.mark.parametrize("d, eps", [(1, 0.5), (2, 0.0), (2, 1.5)])
def test_lemma1_rejects(d, eps):
    with pytest.raises(ValueError):
        lemma1_bounds(d, eps)


def test_octahedron_radius_value():
    # vertex to face-centre angle on the Bloch sphere is acos(1/sqrt(3))
    assert octahedron_radius() == pytest.approx(0.45970084338098310, abs=1e-15)
    face = np.array([1, 1, 1]) / math.sqrt(3)
    theta, phi = math.acos(face[2]), math.atan2(face[1], face[0])
    v = np.array([math.cos(theta / 2), math.sin(theta / 2) * np.exp(1j * phi)])
    d = pure_distances(octahedron_net().points, v[None])
    assert d.min() == pytest.approx(octahedron_radius(), abs=1e-12)


def test_octahedron_certifies():
    net = octahedron_net()
    r = certify_covering(net, 100_000, seed=42)
    assert 0.45 <= r <= octahedron_radius() + 1e-12
    assert net.samples == 100_000 and net.certified_radius == r


def test_certify_independent_of_workers(monkeypatch):
    net = octahedron_net()
    monkeypatch.setenv("DLAB_THREADS", "1")
    a = certify_covering(net, 20_000, seed=3)
    monkeypatch.setenv("DLAB_THREADS", "4")
    b = certify_covering(net, 20_000, seed=3)
    assert a == b


def test_greedy_net_meets_lower_bound():
    for eps in (0.25, 0.46):
        net = build_net_greedy(2, eps, 20_000, seed=1)
        assert len(net) >= lemma1_bounds(2, eps).min_size
        assert net.meta["pool_radius"] <= eps


def test_greedy_is_deterministic():
    a = build_net_greedy(2, 0.5, 5_000, seed=7)
    b = build_net_greedy(2, 0.5, 5_000, seed=7)
    np.testing.assert_array_equal(a.points, b.points)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
def test_greedy_infeasible(eps):
    with pytest.raises(ValueError, match="net infeasible"):
        build_net_greedy(2, eps)


def test_net_validation():
    with pytest.raises(ValueError):
        PureNet(np.array([[1, 0], [1j, 0]]), 0.5)
    with pytest.raises(ValueError):
        PureNet(np.array([[1, 1]]), 0.5)


def test_json_round_trip():
    net = octahedron_net()
    certify_covering(net, 4096, seed=0)
    back = PureNet.from_json(net.to_json())
    np.testing.assert_array_equal(back.points, net.points)
    assert back.certified_radius == net.certified_radius


def test_convex_cover_face_centre():
    # the worst target for the octahedron hull is a face centre, at exactly r^2 = (1 - 1/sqrt(3)) / 2
    face = np.array([1, 1, 1]) / math.sqrt(3)
    theta, phi = math.acos(face[2]), math.atan2(face[1], face[0])
    v = np.array([math.cos(theta / 2), math.sin(theta / 2) * np.exp(1j * phi)])
    fit = convex_cover_distance(octahedron_net(), v)
    assert fit.distance == pytest.approx(0.5 * (1 - 1 / math.sqrt(3)), abs=1e-7)
    assert fit.distance <= octahedron_radius() ** 2 + 1e-12


def test_convex_cover_net_point_is_exact():
    net = octahedron_net()
    assert convex_cover_distance(net, net.points[2]).distance < 1e-12


def test_convex_cover_random_targets():
    net = octahedron_net()
    worst = max(convex_cover_distance(net, t).distance for t in haar_vector(make_rng(0), 2, 50))
    assert worst <= octahedron_radius() ** 2 + 1e-9
