import math

import numpy as np
import pytest

from dlab.metrics import fidelity, trace_distance
from dlab.qcore import (
    DimensionError,
    choi_of,
    haar_vector,
    identity_channel,
    make_rng,
    random_density,
    replacement_channel,
)
from dlab.sepkit import (
    Rank1Povm,
    SepEnsemble,
    best_product,
    choi_from_decomposition,
    eb_membership,
    fit_separable,
    lemma2_rhs,
    measure_prepare_channel,
    nearest_sep_trace_ub,
    ppt_min_eig,
    random_sep_ensemble,
    seesaw_sep_fidelity,
)
from oracles import ppt_max_fidelity

BELL = np.zeros((4, 4))
BELL[np.ix_([0, 3], [0, 3])] = 0.5


def test_ppt_values():
    assert ppt_min_eig(BELL, (2, 2)) == pytest.approx(-0.5, abs=1e-12)
    assert ppt_min_eig(np.eye(4) / 4, (2, 2)) == pytest.approx(0.25, abs=1e-12)
    sep = random_sep_ensemble(2, 3, seed=1).as_density()
    assert ppt_min_eig(sep, (2, 3)) >= -1e-12


def test_bipartition_required():
    with pytest.raises(DimensionError):
        ppt_min_eig(np.eye(4) / 4, (2, 3))


def test_ensemble_json_and_density():
    ens = random_sep_ensemble(2, 2, size=5, seed=0)
    back = SepEnsemble.from_json(ens.to_json())
    np.testing.assert_allclose(back.as_density(), ens.as_density(), atol=1e-15)
    assert abs(np.trace(ens.as_density()) - 1) < 1e-12


def test_ensemble_size_cap():
    v = haar_vector(make_rng(0), 2, 17)
    with pytest.raises(ValueError):
        SepEnsemble(np.full(17, 1 / 17), v, v)


def test_best_product_matches_svd_for_projector():
    # for H = |psi><psi| the best product overlap is the top Schmidt coefficient squared
    psi = haar_vector(make_rng(2), 6)
    val, a, b = best_product(np.outer(psi, psi.conj()), 2, 3, make_rng(0))
    s = np.linalg.svd(psi.reshape(2, 3), compute_uv=False)
    assert val == pytest.approx(s[0] ** 2, abs=1e-10)


def test_fit_separable_reproduces_separable_states():
    for seed in range(3):
        sep = random_sep_ensemble(2, 3, seed=seed).as_density()
        ens = fit_separable(sep, (2, 3), seed=seed)
        assert np.linalg.norm(ens.as_density() - sep) < 1e-8


def test_nearest_sep_bell_is_half():
    # tr(Phi sigma) <= 1/2 on SEP gives T >= 1/2; the dephased Bell state attains it
    res = nearest_sep_trace_ub(BELL, (2, 2), seed=0)
    assert res.dist_ub == pytest.approx(0.5, abs=1e-6)
    assert res.bound == "upper"


def test_nearest_sep_zero_on_separable():
    sep = random_sep_ensemble(2, 2, seed=4).as_density()
    assert nearest_sep_trace_ub(sep, (2, 2), seed=0).dist_ub < 1e-6


def test_nearest_sep_respects_fidelity_lower_bound():
    # T(rho, SEP) >= 1 - sqrt(max F) and for pure rho max F is the top Schmidt coefficient squared
    rng = make_rng(7)
    for _ in range(3):
        psi = haar_vector(rng, 4)
        s0 = np.linalg.svd(psi.reshape(2, 2), compute_uv=False)[0]
        res = nearest_sep_trace_ub(np.outer(psi, psi.conj()), (2, 2), seed=1)
        assert res.dist_ub >= 1 - s0 - 1e-9
        assert abs(trace_distance(np.outer(psi, psi.conj()), res.witness.as_density()) - res.dist_ub) < 1e-9


def test_seesaw_pure_states_match_schmidt():
    rng = make_rng(8)
    for _ in range(3):
        psi = haar_vector(rng, 6)
        s0 = np.linalg.svd(psi.reshape(2, 3), compute_uv=False)[0]
        res = seesaw_sep_fidelity(np.outer(psi, psi.conj()), (2, 3), restarts=2, iters=100, seed=0)
        assert res.f_lb == pytest.approx(s0**2, abs=1e-6)


def test_seesaw_bell_and_separable():
    assert seesaw_sep_fidelity(BELL, (2, 2), restarts=2, iters=100, seed=0).f_lb == pytest.approx(0.5, abs=1e-6)
    sep = random_sep_ensemble(2, 2, seed=9).as_density()
    assert seesaw_sep_fidelity(sep, (2, 2), restarts=2, iters=100, seed=0).f_lb >= 1 - 1e-6


def test_seesaw_history_monotone_and_witness_consistent():
    rho = random_density(4, seed=11).matrix
    res = seesaw_sep_fidelity(rho, (2, 2), restarts=2, iters=100, seed=3)
    assert all(b >= a - 1e-12 for a, b in zip(res.history, res.history[1:]))
    assert res.f_lb == pytest.approx(fidelity(rho, res.witness.as_density()), abs=1e-12)


def test_seesaw_and_lemma2_match_sdp_oracle():
    # PPT = SEP for two qubits, so the SDP value is the exact max separable fidelity
    pytest.importorskip("cvxpy")
    for seed in range(4):
        rho = random_density(4, seed=100 + seed).matrix
        exact = ppt_max_fidelity(rho)
        f = seesaw_sep_fidelity(rho, (2, 2), restarts=3, iters=200, seed=seed).f_lb
        g = lemma2_rhs(rho, (2, 2), r=4, restarts=3, iters=200, seed=seed).value
        assert f <= exact + 1e-6
        assert f == pytest.approx(exact, abs=1e-4)
        assert g == pytest.approx(exact, abs=1e-4)


def test_lemma2_bell():
    res = lemma2_rhs(BELL, (2, 2), r=4, restarts=2, iters=100, seed=0)
    assert res.value == pytest.approx(0.5, abs=1e-6)
    assert all(b >= a - 1e-12 for a, b in zip(res.history, res.history[1:]))


def test_povm_closure():
    with pytest.raises(ValueError):
        Rank1Povm(np.array([[1, 0], [0, 0.5]]))


def test_measure_prepare_channel_action():
    povm = Rank1Povm(np.eye(2, dtype=complex))
    prep = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    ch = measure_prepare_channel(povm, prep)
    out = ch(np.diag([0.25, 0.75]))
    want = 0.25 * np.outer(prep[0], prep[0]) + 0.75 * np.outer(prep[1], prep[1])
    np.testing.assert_allclose(out, want, atol=1e-14)


def test_eb_membership_cases():
    rep = eb_membership(choi_of(replacement_channel(2, random_density(2, seed=1))).matrix, in_dim=2, out_dim=2)
    assert rep.verdict == "member"
    ident = eb_membership(choi_of(identity_channel(2)).matrix, in_dim=2, out_dim=2)
    assert ident.verdict == "non_member"
    assert ident.evidence["ppt_min_eig"] == pytest.approx(-0.5, abs=1e-10)


def test_eb_round_trip_reconstructs_choi():
    rng = make_rng(5)
    q, _ = np.linalg.qr(haar_vector(rng, 3, 2).T)
    povm = Rank1Povm(q.conj())
    j = choi_from_decomposition(povm, haar_vector(rng, 2, 3))
    rep = eb_membership(j, in_dim=2, out_dim=2, seed=1)
    assert rep.verdict == "member"
    assert np.abs(rep.reconstructed_choi() - j).max() < 1e-6
