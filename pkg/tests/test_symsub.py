import math

import numpy as np
import pytest

from dlab.purenet import default_net
from dlab.qcore import haar_vector, make_rng, ptrace
from dlab.symsub import (
    CapExceeded,
    definetti_fit,
    definetti_fit_general,
    embed_product,
    occupations,
    random_symmetric_state,
    reduce_symmetric,
    sym_coordinates,
    sym_dimension,
    sym_isometry,
)
from oracles import sym_projector


@pytest.mark.parametrize("d, n", [(2, 3), (2, 8), (3, 6), (4, 2)])
def test_dimension_is_binomial(d, n):
    assert sym_dimension(d, n) == math.comb(n + d - 1, d - 1) == len(occupations(d, n))


def test_dimension_cap():
    with pytest.raises(CapExceeded):
        sym_dimension(40, 40)


@pytest.mark.parametrize("d, n", [(2, 3), (3, 2), (2, 4)])
def test_isometry_projects_onto_symmetric_subspace(d, n):
    u = sym_isometry(d, n).matrix
    np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[1]), atol=1e-12)
    np.testing.assert_allclose(u @ u.conj().T, sym_projector(d, n), atol=1e-12)


def test_first_columns():
    u = sym_isometry(2, 2).matrix
    # occupations in ascending order: (0,2), (1,1), (2,0)
    np.testing.assert_allclose(u[:, 0], [0, 0, 0, 1])
    np.testing.assert_allclose(u[:, 1], np.array([0, 1, 1, 0]) / math.sqrt(2))
    np.testing.assert_allclose(u[:, 2], [1, 0, 0, 0])


def test_coordinates_of_product():
    phi = haar_vector(make_rng(0), 3)
    n = 3
    full = phi
    for _ in range(n - 1):
        full = np.kron(full, phi)
    np.testing.assert_allclose(sym_isometry(3, n).matrix @ sym_coordinates(phi, n), full, atol=1e-12)


def test_reduce_matches_dense_partial_trace():
    d, n, k, aux = 2, 4, 2, 2
    small = random_symmetric_state(d, n, aux, seed=1)
    u = np.kron(sym_isometry(d, n).matrix, np.eye(aux))
    big = u @ small @ u.conj().T
    dense = ptrace(big, (d,) * n + (aux,), list(range(k, n)))
    np.testing.assert_allclose(reduce_symmetric(small, d, n, k, aux), dense, atol=1e-12)


def test_product_reduces_to_product():
    phi = haar_vector(make_rng(5), 2)
    psi = haar_vector(make_rng(6), 3)
    x = embed_product(phi, 6, psi)
    red = reduce_symmetric(np.outer(x, x.conj()), 2, 6, 1, 3)
    target = np.kron(np.outer(phi, phi.conj()), np.outer(psi, psi.conj()))
    np.testing.assert_allclose(red, target, atol=1e-12)


def test_definetti_bound_k1():
    net = default_net(2)
    for s in range(10):
        small = random_symmetric_state(2, 8, rank=2, seed=s)
        assert definetti_fit(reduce_symmetric(small, 2, 8, 1), net, 1).distance < 2 / 8


def test_definetti_bound_k2():
    net = default_net(2)
    for s in range(5):
        small = random_symmetric_state(2, 6, rank=1, seed=s)
        assert definetti_fit(reduce_symmetric(small, 2, 6, 2), net, 2).distance < 2 * 2 / 6


def test_iid_state_fits_exactly():
    net = default_net(2)
    phi = net.points[17]
    x = embed_product(phi, 5)
    red = reduce_symmetric(np.outer(x, x.conj()), 2, 5, 2)
    assert definetti_fit(red, net, 2).distance < 1e-9


def test_general_fit_with_aux():
    small = random_symmetric_state(2, 6, 2, rank=2, seed=3)
    red = reduce_symmetric(small, 2, 6, 1, 2)
    fit = definetti_fit_general(red, default_net(2), 1, 2)
    assert fit.distance < 2 / 6


def test_general_fit_without_aux_is_plain_fit():
    red = reduce_symmetric(random_symmetric_state(2, 6, seed=4), 2, 6, 2)
    a = definetti_fit_general(red, default_net(2), 2)
    b = definetti_fit(red, default_net(2), 2)
    assert a.distance == b.distance and a.mixture.aux_states is None
