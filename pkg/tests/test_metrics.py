import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlab.metrics import check_monotonicity, fidelity, metric_report, pure_fidelity, purify, trace_distance
from dlab.qcore import DimensionError, haar_vector, make_rng, partial_trace, random_channel, random_density
from oracles import bloch, qubit_fidelity


def test_trace_distance_qubits_is_half_bloch_distance():
    for s in range(20):
        a, b = random_density(2, seed=s).matrix, random_density(2, seed=100 + s).matrix
        assert abs(trace_distance(a, b) - 0.5 * np.linalg.norm(bloch(a) - bloch(b))) < 1e-12


def test_fidelity_qubit_closed_form():
    for s in range(20):
        a, b = random_density(2, seed=s).matrix, random_density(2, seed=100 + s).matrix
        assert abs(fidelity(a, b) - qubit_fidelity(a, b)) < 1e-10


def test_fidelity_commuting_is_classical():
    p, q = np.array([0.5, 0.3, 0.2]), np.array([0.1, 0.1, 0.8])
    assert abs(fidelity(np.diag(p), np.diag(q)) - np.sum(np.sqrt(p * q)) ** 2) < 1e-14


def test_orthogonal_and_identical():
    assert trace_distance(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(1.0)
    assert fidelity(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(0.0, abs=1e-14)
    rho = random_density(3, seed=0).matrix
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)


def test_pure_fidelity():
    phi, psi = np.array([1, 0]), np.array([1, 1]) / math.sqrt(2)
    assert pure_fidelity(phi, psi) == pytest.approx(0.5)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        trace_distance(np.eye(2) / 2, np.eye(3) / 3)


def test_purify_marginal():
    rho = random_density(3, rank=2, seed=4)
    psi = purify(rho)
    assert psi.factor_dims == (3, 3)
    np.testing.assert_allclose(partial_trace(psi.density(), [1]).matrix, rho.matrix, atol=1e-12)


def test_fg_equality_for_pure_states():
    rng = make_rng(3)
    for _ in range(50):
        phi, psi = haar_vector(rng, 4), haar_vector(rng, 4)
        rep = metric_report(np.outer(phi, phi.conj()), np.outer(psi, psi.conj()))
        assert abs(rep.trace_distance - rep.fg_upper) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 4, 6]), st.integers(0, 2**31), st.integers(1, 6), st.integers(1, 6))
def test_fg_sandwich(d, seed, ra, rb):
    rng = make_rng(seed)
    a = random_density(d, min(ra, d), rng).matrix
    b = random_density(d, min(rb, d), rng).matrix
    assert metric_report(a, b).sandwich_slack >= -1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**31))
def test_monotonicity(d_in, d_out, seed):
    rng = make_rng(seed)
    a, b = random_density(d_in, seed=rng), random_density(d_in, seed=rng)
    st_, sf = check_monotonicity(a, b, random_channel(d_in, d_out, seed=rng))
    assert st_ >= -1e-9 and sf >= -1e-9
