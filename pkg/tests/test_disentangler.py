import math

import numpy as np
import pytest

from dlab import disentangler as dis
from dlab.metrics import trace_distance
from dlab.purenet import PureNet, certify_covering, octahedron_net, octahedron_radius
from dlab.qcore import KRAUS_TOL, haar_vector, make_rng, random_density
from dlab.symsub import CapExceeded, embed_product, reduce_symmetric, sym_coordinates


@pytest.fixture(scope="module")
def net_spec():
    net = octahedron_net()
    certify_covering(net, 100_000, seed=42)
    return dis.build_net_disentangler(net)


@pytest.fixture(scope="module")
def df_spec():
    return dis.build_definetti_disentangler(2, 8)


def _closure(spec):
    k = spec.channel.kraus
    return np.abs(np.einsum("kai,kaj->ij", k.conj(), k) - np.eye(k.shape[2])).max()


def test_net_spec_shape(net_spec):
    assert net_spec.D == 12 and net_spec.log2_D == pytest.approx(math.log2(12))
    assert net_spec.eps_claim == 0
    assert net_spec.delta_claim == pytest.approx(net_spec.net.certified_radius**2)
    assert net_spec.delta_claim <= octahedron_radius() ** 2 + 1e-12
    assert _closure(net_spec) < KRAUS_TOL


def test_net_spec_needs_certificate():
    with pytest.raises(ValueError):
        dis.build_net_disentangler(octahedron_net())


def test_net_spec_register_input(net_spec):
    psi = haar_vector(make_rng(1), 2)
    e = np.zeros(6)
    e[4] = 1
    x = np.kron(e, psi)
    out = net_spec.apply(np.outer(x, x.conj()))
    phi = net_spec.net.points[4]
    np.testing.assert_allclose(out, np.kron(np.outer(phi, phi.conj()), np.outer(psi, psi.conj())), atol=1e-14)


def test_net_spec_output_formula(net_spec):
    # Lambda(rho) = sum_phi phi (x) <e_phi| rho |e_phi>, evaluated blockwise
    rho = random_density(12, seed=3).matrix
    blocks = rho.reshape(6, 2, 6, 2)
    want = sum(np.kron(np.outer(p, p.conj()), blocks[i, :, i, :]) for i, p in enumerate(net_spec.net.points))
    np.testing.assert_allclose(net_spec.apply(rho), want, atol=1e-14)


def test_definetti_spec_shape(df_spec):
    assert df_spec.D == 18 and df_spec.eps_claim == 0.25 and df_spec.delta_claim == 0
    assert _closure(df_spec) < KRAUS_TOL
    small = dis.build_definetti_disentangler(2, 2)
    assert small.D == 6 and small.eps_claim == 1.0


def test_definetti_spec_matches_reduce_symmetric(df_spec):
    rho = random_density(18, seed=8).matrix
    np.testing.assert_allclose(df_spec.apply(rho), reduce_symmetric(rho, 2, 8, 1, 2), atol=1e-13)


def test_definetti_product_input(df_spec):
    phi, psi = haar_vector(make_rng(2), 2), haar_vector(make_rng(3), 2)
    x = embed_product(phi, 8, psi)
    out = df_spec.apply(np.outer(x, x.conj()))
    np.testing.assert_allclose(out, np.kron(np.outer(phi, phi.conj()), np.outer(psi, psi.conj())), atol=1e-13)
    assert np.allclose(x, np.kron(sym_coordinates(phi, 8), psi))


def test_definetti_caps():
    with pytest.raises(CapExceeded):
        dis.build_definetti_disentangler(2, 11)
    with pytest.raises(CapExceeded):
        dis.build_definetti_disentangler(3, 7)


def test_condition1_net(net_spec):
    rep = dis.verify_condition1(net_spec, trials=20, seed=1, restarts=3)
    assert rep.passed and rep.worst_observed <= 1e-5 and rep.condition == "c1"


def test_condition2_net(net_spec):
    rep = dis.verify_condition2(net_spec, targets=40, seed=1)
    assert rep.passed and rep.worst_observed <= 0.2116 + 1e-6


def test_condition2_net_targets_on_net(net_spec):
    from dlab.disentangler import _net_input
    from dlab.sepkit import SepEnsemble

    pts = net_spec.net.points
    ens = SepEnsemble(np.array([0.3, 0.7]), pts[[1, 4]], haar_vector(make_rng(0), 2, 2))
    assert trace_distance(net_spec.apply(_net_input(net_spec, ens)), ens.as_density()) < 1e-9


def test_condition2_definetti_exact(df_spec):
    rep = dis.verify_condition2(df_spec, targets=40, seed=1)
    assert rep.worst_observed <= 1e-9 and rep.passed


def test_condition1_definetti(df_spec):
    rep = dis.verify_condition1(df_spec, trials=20, seed=2, restarts=3)
    assert rep.worst_observed <= 0.25


def test_strong_condition1_definetti(df_spec):
    rep = dis.verify_strong_condition1(df_spec, dim_r=2, trials=4, seed=3, restarts=3)
    assert rep.worst_observed <= 0.25 + 1e-3
    assert "dim_R=2" in rep.notes


def test_strong_with_trivial_reference_equals_condition1(net_spec):
    a = dis.verify_strong_condition1(net_spec, dim_r=1, trials=6, seed=5, restarts=3)
    b = dis.verify_condition1(net_spec, trials=6, seed=5, restarts=3)
    assert np.allclose(a.values, b.values, atol=1e-9, rtol=0)


def test_eb_reduction(net_spec):
    rep = dis.eb_reduction_check(net_spec)
    assert rep.passed and rep.verdict.verdict == "member"
    assert not dis.eb_reduction_check(dis.identity_spec(2)).passed


def test_eb_reduction_definetti_small_reports():
    rep = dis.eb_reduction_check(dis.build_definetti_disentangler(2, 4))
    assert rep.verdict.verdict in ("member", "inconclusive", "non_member")


def test_eb_reduction_cap():
    with pytest.raises(CapExceeded):
        dis.eb_reduction_check(dis.build_definetti_disentangler(3, 6))


def test_negative_controls():
    rep = dis.verify_condition1(dis.identity_spec(2), trials=3, seed=0, restarts=3)
    assert not rep.passed and rep.worst_observed == pytest.approx(0.5, abs=5e-3)
    sw = dis.verify_condition1(dis.swap_spec(2), trials=3, seed=0, restarts=3)
    assert not sw.passed


def test_generic_input_optimisation(df_spec):
    rep = dis.verify_condition2(df_spec, targets=2, seed=4, generic_input_opt=True)
    assert rep.worst_observed < 0.05


def test_theorem_bound_values():
    tb = dis.theorem_lower_bound(21, 0.0, 0.04)
    assert tb.delta_quantity == pytest.approx(0.36)
    assert tb.log2_D_lower == pytest.approx(10 * math.log2(1 / 0.36) - 2 * math.log2(21))
    assert tb.log2_D_lower == pytest.approx(5.9547, abs=1e-4)
    small = dis.theorem_lower_bound(2, 0.25, 0.0)
    assert small.delta_quantity == pytest.approx(0.4375) and small.vacuous
    assert dis.theorem_lower_bound(5, 0, 0).unbounded


@pytest.mark.parametrize("eps, delta", [(1.0, 0.0), (0.5, 0.25), (0.0, 1.0)])
def test_theorem_hypothesis(eps, delta):
    with pytest.raises(ValueError, match="theorem hypothesis violated"):
        dis.theorem_lower_bound(2, eps, delta)


def test_construction_size_bounds():
    sb = dis.construction_size_bounds("definetti", 2, 8)
    assert sb.log2_D_actual == pytest.approx(math.log2(18))
    assert sb.log2_D_paper_upper == pytest.approx(math.log2(math.e * (1 + 2 * (4 + 0.5))) + 1)
    assert sb.holds
    # a net as small as the minimum-size bound allows meets the closed-form bound
    size = dis.minimal_net_size(2, 0.3)
    nb = dis.construction_size_bounds("net", 2, (size, 0.3))
    assert nb.asserted and nb.holds


def test_specs_respect_theorem(net_spec, df_spec):
    for spec in (net_spec, df_spec):
        tb = dis.theorem_lower_bound(spec.d, spec.eps_claim, spec.delta_claim)
        assert tb.log2_D_lower <= 0 or spec.log2_D >= tb.log2_D_lower
