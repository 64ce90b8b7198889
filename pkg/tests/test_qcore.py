import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlab import qcore
from dlab.qcore import (
    ChoiOp,
    DensityOp,
    DimensionError,
    InvariantError,
    KrausChannel,
    PureState,
    apply_choi,
    apply_kraus,
    channel_of,
    choi_matrix,
    choi_of,
    derive_seed,
    haar_unitary,
    haar_vector,
    make_rng,
    parallel_map,
    partial_trace,
    ptrace,
    ptranspose,
    random_channel,
    random_density,
    tensor,
)
from oracles import ptrace_loop, ptranspose_b_loop


def test_ptrace_matches_loop(rng):
    rho = random_density(6, seed=rng).matrix
    np.testing.assert_allclose(ptrace(rho, (2, 3), [1]), ptrace_loop(rho, 2, 3, "A"), atol=1e-14)
    np.testing.assert_allclose(ptrace(rho, (2, 3), [0]), ptrace_loop(rho, 2, 3, "B"), atol=1e-14)


def test_ptranspose_matches_loop(rng):
    rho = random_density(6, seed=rng).matrix
    np.testing.assert_allclose(ptranspose(rho, (2, 3), [1]), ptranspose_b_loop(rho, 2, 3), atol=1e-15)
    np.testing.assert_allclose(ptranspose(ptranspose(rho, (2, 3), [0]), (2, 3), [1]), rho.T, atol=1e-15)


def test_partial_trace_typed():
    a, b = random_density(2, seed=1), random_density(3, seed=2)
    ab = tensor(a, b)
    assert ab.factor_dims == (2, 3)
    np.testing.assert_allclose(partial_trace(ab, [1]).matrix, a.matrix, atol=1e-14)
    np.testing.assert_allclose(partial_trace(ab, [0]).matrix, b.matrix, atol=1e-14)
    assert abs(partial_trace(ab, [0, 1]) - 1) < 1e-14


def test_density_invariants():
    with pytest.raises(InvariantError):
        DensityOp(np.diag([1.5, -0.5]))
    with pytest.raises(InvariantError):
        DensityOp(np.array([[0.5, 0.1], [0.3, 0.5]]))
    with pytest.raises(DimensionError):
        DensityOp(np.eye(4) / 4, (2, 3))
    with pytest.raises(InvariantError):
        PureState(np.array([1.0, 1.0]))


def test_pure_state_projector():
    psi = PureState.from_vector([1, 1j])
    np.testing.assert_allclose(psi.projector(), np.array([[1, -1j], [1j, 1]]) / 2)


def test_choi_kraus_round_trip():
    ch = random_channel(2, 3, seed=5)
    choi = choi_of(ch)
    back = channel_of(choi)
    rho = random_density(2, seed=6).matrix
    np.testing.assert_allclose(back(rho), ch(rho), atol=1e-12)
    np.testing.assert_allclose(apply_choi(choi.matrix, 2, 3, rho), apply_kraus(ch.kraus, rho), atol=1e-12)


def test_choi_of_identity_is_unnormalised_bell():
    j = choi_matrix(np.eye(2)[None])
    v = np.array([1, 0, 0, 1])
    np.testing.assert_allclose(j, np.outer(v, v))


def test_choi_rejects_non_tp():
    with pytest.raises(InvariantError):
        ChoiOp(np.eye(4), 2, 2)


def test_kraus_closure_enforced():
    with pytest.raises(InvariantError):
        KrausChannel(np.stack([np.eye(2), np.eye(2)]))


def test_replacement_channel():
    tau = random_density(3, seed=3)
    ch = qcore.replacement_channel(2, tau)
    out = ch(random_density(2, seed=4).matrix)
    np.testing.assert_allclose(out, tau.matrix, atol=1e-12)


def test_haar_vector_moments():
    # E|<0|psi>|^2 = 1/d and E|<0|psi>|^4 = 2/(d(d+1))
    d = 3
    v = haar_vector(make_rng(0), d, 200_000)
    p = np.abs(v[:, 0]) ** 2
    assert abs(p.mean() - 1 / d) < 3e-3
    assert abs((p**2).mean() - 2 / (d * (d + 1))) < 3e-3


def test_haar_unitary_is_unitary_and_phase_uniform():
    us = [haar_unitary(make_rng(i), 3) for i in range(2000)]
    for u in us[:10]:
        np.testing.assert_allclose(u @ u.conj().T, np.eye(3), atol=1e-12)
    # the QR phase fix makes E[U] = 0
    assert np.abs(np.mean(us, axis=0)).max() < 0.06


def test_random_density_rank():
    rho = random_density(4, rank=2, seed=0).matrix
    w = np.linalg.eigvalsh(rho)
    assert (w[:2] < 1e-12).all() and (w[2:] > 1e-6).all()


def test_derived_seeds_are_stable():
    a = make_rng(derive_seed(42, 3, 1)).random()
    b = make_rng(derive_seed(42, 3, 1)).random()
    c = make_rng(derive_seed(42, 3, 2)).random()
    assert a == b and a != c


def test_parallel_map_preserves_order(monkeypatch):
    monkeypatch.setenv("DLAB_THREADS", "4")
    assert parallel_map(lambda x: x * x, list(range(20))) == [x * x for x in range(20)]


def test_json_round_trip():
    rho = random_density(4, seed=2, factor_dims=(2, 2))
    obj = json.loads(json.dumps(qcore.matrix_to_json(rho)))
    mat, dims = qcore.matrix_from_json(obj)
    assert dims == (2, 2)
    np.testing.assert_array_equal(mat, rho.matrix)


def test_qmx_round_trip(tmp_path):
    rho = random_density(3, seed=2).matrix
    data = qcore.to_qmx(rho)
    assert data[:4] == b"QMX1"
    np.testing.assert_array_equal(qcore.from_qmx(data), rho)
    path = tmp_path / "r.qmx"
    path.write_bytes(data)
    np.testing.assert_array_equal(qcore.load_matrix(path)[0], rho)


def test_qmx_rejects_bad_magic():
    with pytest.raises(ValueError):
        qcore.from_qmx(b"XXXX" + bytes(8))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 10_000))
def test_channel_outputs_are_states(d_in, d_out, seed):
    ch = random_channel(d_in, d_out, seed=seed)
    out = ch(random_density(d_in, seed=seed + 1).matrix)
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-12
