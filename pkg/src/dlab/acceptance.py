"""The acceptance suite: numbered end-to-end checks with fixed tolerances.

Each ``criterion_*`` function takes a master seed and returns a plain dict
with an ``id``, a ``name``, ``passed`` and the measured numbers.  No timings
or other run-dependent values are recorded, so two runs with the same seed
produce identical reports whatever the worker count.
"""

from __future__ import annotations

import contextlib
import io
import logging
import math
import time

import numpy as np

from . import disentangler as dis
from .metrics import check_monotonicity, metric_report, pure_fidelity, trace_distance
from .purenet import (
    build_net_greedy,
    certify_covering,
    convex_cover_distance,
    default_net,
    lemma1_bounds,
    octahedron_net,
)
from .qcore import (
    choi_of,
    derive_seed,
    haar_vector,
    identity_channel,
    make_rng,
    random_channel,
    random_density,
    replacement_channel,
)
from .sepkit import (
    Rank1Povm,
    choi_from_decomposition,
    eb_membership,
    lemma2_rhs,
    seesaw_sep_fidelity,
)
from .symsub import definetti_fit, random_symmetric_state, reduce_symmetric

log = logging.getLogger(__name__)

# reduced effort for the heuristic optimisers; see the notes in the README
SUITE_RESTARTS = 3
SUITE_ITERS = 200


def _sub(seed: int, *key: int) -> int:
    """Integer sub-seed for criterion ``key`` of a master seed."""
    return int(derive_seed(seed, *key).generate_state(1)[0])


def _result(cid: int, name: str, passed: bool, **values) -> dict:
    return {"id": cid, "name": name, "passed": bool(passed), "values": values}


def criterion_1(seed: int) -> dict:
    """1 - sqrt(F) <= T <= sqrt(1 - F) on random pairs; equality on the right for pure pairs."""
    dims = (2, 3, 4, 6)
    worst_slack, worst_pure = math.inf, 0.0
    for i in range(1000):
        d = dims[i % 4]
        rng = make_rng(derive_seed(_sub(seed, 1), i))
        rank_a, rank_b = (int(r) for r in rng.integers(1, d + 1, size=2))
        rho = random_density(d, rank_a, rng).matrix
        sigma = random_density(d, rank_b, rng).matrix
        worst_slack = min(worst_slack, metric_report(rho, sigma).sandwich_slack)
        phi, psi = haar_vector(rng, d), haar_vector(rng, d)
        t = trace_distance(np.outer(phi, phi.conj()), np.outer(psi, psi.conj()))
        worst_pure = max(worst_pure, abs(t - math.sqrt(max(0.0, 1 - pure_fidelity(phi, psi)))))
    passed = worst_slack >= -1e-9 and worst_pure <= 1e-9
    return _result(1, "FG inequalities", passed, pairs=1000, min_sandwich_slack=worst_slack,
                   max_pure_equality_error=worst_pure, tolerance=1e-9)


def criterion_2(seed: int) -> dict:
    """Trace distance contracts and fidelity expands under random channels."""
    worst_t, worst_f = math.inf, math.inf
    for i in range(100):
        rng = make_rng(derive_seed(_sub(seed, 2), i))
        d_in, d_out = (int(x) for x in rng.integers(2, 5, size=2))
        rho = random_density(d_in, None, rng)
        sigma = random_density(d_in, int(rng.integers(1, d_in + 1)), rng)
        ch = random_channel(d_in, d_out, seed=rng)
        st, sf = check_monotonicity(rho, sigma, ch)
        worst_t, worst_f = min(worst_t, st), min(worst_f, sf)
    passed = worst_t >= -1e-9 and worst_f >= -1e-9
    return _result(2, "Monotonicity", passed, triples=100, min_trace_slack=worst_t, min_fidelity_slack=worst_f,
                   tolerance=1e-9)


def criterion_3(seed: int) -> dict:
    """Certified nets are at least as large as the lower size bound; the octahedron radius."""
    nets = []
    ok = True
    for j, eps in enumerate((0.25, 0.46)):
        net = build_net_greedy(2, eps, seed=_sub(seed, 3, j))
        radius = certify_covering(net, 100_000, seed=_sub(seed, 3, 10 + j))
        need = lemma1_bounds(2, eps).min_size
        nets.append({"epsilon": eps, "size": len(net), "min_size": need, "certified_radius": radius})
        ok &= len(net) >= need
    octa = octahedron_net()
    r_oct = certify_covering(octa, 100_000, seed=_sub(seed, 3, 20))
    ok &= len(octa) >= lemma1_bounds(2, 0.46).min_size
    ok &= 0.45 <= r_oct <= 0.4597
    return _result(3, "Lemma 1 consistency", ok, nets=nets, octahedron_size=len(octa), octahedron_radius=r_oct,
                   radius_window=[0.45, 0.4597])


def criterion_4(seed: int) -> dict:
    """The convex hull of the octahedron net covers pure states to within r^2."""
    net = octahedron_net()
    targets = haar_vector(make_rng(_sub(seed, 4)), 2, 100)
    worst = max(convex_cover_distance(net, t).distance for t in targets)
    return _result(4, "Convex-hull fact", worst <= 0.2116 + 0.01, targets=100, worst_fit=worst, claim=0.2116,
                   tolerance=0.01)


def criterion_5(seed: int) -> dict:
    """k-body marginals of symmetric states lie within k d / n of i.i.d. mixtures."""
    net = default_net(2)
    rows = []
    ok = True
    for j, (n, k, count) in enumerate(((8, 1, 50), (6, 2, 20))):
        bound = k * 2 / n
        dists = []
        for i in range(count):
            rng = make_rng(derive_seed(_sub(seed, 5, j), i))
            rank = int(rng.integers(1, 4))
            small = random_symmetric_state(2, n, rank=rank, seed=rng)
            dists.append(definetti_fit(reduce_symmetric(small, 2, n, k), net, k).distance)
        violations = sum(x >= bound for x in dists)
        ok &= violations == 0
        rows.append({"n": n, "k": k, "states": count, "bound": bound, "worst_fit": max(dists),
                     "violations": violations})
    return _result(5, "De Finetti bound", ok, sweeps=rows, net_size=len(net))


def _octahedron_spec(seed: int) -> dis.DisentanglerSpec:
    net = octahedron_net()
    certify_covering(net, 100_000, seed=seed)
    return dis.build_net_disentangler(net)


def criterion_6(seed: int) -> dict:
    """Net disentangler: exact separability, cover of SEP to r^2, EB reduction."""
    spec = _octahedron_spec(_sub(seed, 6, 0))
    c1 = dis.verify_condition1(spec, trials=200, seed=_sub(seed, 6, 1), restarts=SUITE_RESTARTS)
    c2 = dis.verify_condition2(spec, targets=200, seed=_sub(seed, 6, 2))
    eb = dis.eb_reduction_check(spec, seed=_sub(seed, 6, 3))
    ok_c1 = c1.worst_observed <= 1e-5
    ok_c2 = c2.worst_observed <= 0.2116 + 1e-6
    ok_eb = eb.passed
    return _result(6, "Net disentangler", ok_c1 and ok_c2 and ok_eb, D=spec.D, delta_claim=spec.delta_claim,
                   c1=c1.to_json(), c2=c2.to_json(), eb_reduction=eb.to_json())


def criterion_7(seed: int) -> dict:
    """De Finetti disentangler with d=2, n=8."""
    spec = dis.build_definetti_disentangler(2, 8)
    c2 = dis.verify_condition2(spec, targets=200, seed=_sub(seed, 7, 1))
    c1 = dis.verify_condition1(spec, trials=200, seed=_sub(seed, 7, 2), restarts=SUITE_RESTARTS)
    sc1 = dis.verify_strong_condition1(spec, dim_r=2, trials=50, seed=_sub(seed, 7, 3), restarts=SUITE_RESTARTS)
    ok = c2.worst_observed <= 1e-9 and c1.worst_observed <= 0.25 and sc1.worst_observed <= 0.25 + 1e-3
    return _result(7, "De Finetti disentangler", ok and spec.D == 18, D=spec.D, eps_claim=spec.eps_claim,
                   c2=c2.to_json(), c1=c1.to_json(), strong_c1=sc1.to_json())


def criterion_8(seed: int) -> dict:
    """Max separable fidelity equals the Lemma 2 optimum over POVMs and pure states."""
    gaps = []
    for i in range(20):
        rng = make_rng(derive_seed(_sub(seed, 8), i))
        rho = random_density(4, int(rng.integers(1, 5)), rng).matrix
        s = _sub(seed, 8, 100 + i)
        f = seesaw_sep_fidelity(rho, (2, 2), restarts=SUITE_RESTARTS, iters=SUITE_ITERS, seed=s).f_lb
        g = lemma2_rhs(rho, (2, 2), r=4, restarts=SUITE_RESTARTS, iters=SUITE_ITERS, seed=s).value
        gaps.append(abs(f - g))
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    s = _sub(seed, 8, 999)
    fb = seesaw_sep_fidelity(bell, (2, 2), restarts=SUITE_RESTARTS, iters=SUITE_ITERS, seed=s).f_lb
    gb = lemma2_rhs(bell, (2, 2), r=4, restarts=SUITE_RESTARTS, iters=SUITE_ITERS, seed=s).value
    ok = max(gaps) <= 1e-2 and abs(fb - 0.5) <= 1e-2 and abs(gb - 0.5) <= 1e-2
    return _result(8, "Lemma 2 equivalence", ok, states=20, max_gap=max(gaps), bell_seesaw=fb, bell_lemma2=gb,
                   tolerance=1e-2)


def criterion_9(seed: int) -> dict:
    """EB membership on trace-and-replace, identity, and a measure-and-prepare round trip."""
    rng = make_rng(_sub(seed, 9))
    tau = random_density(2, 2, rng)
    v_rep = eb_membership(choi_of(replacement_channel(2, tau)).matrix, in_dim=2, out_dim=2, seed=_sub(seed, 9, 1))
    v_id = eb_membership(choi_of(identity_channel(2)).matrix, in_dim=2, out_dim=2, seed=_sub(seed, 9, 2))
    # a random 3-outcome rank-1 POVM on C^2 from a random isometry C^2 -> C^3
    q, _ = np.linalg.qr(haar_vector(rng, 3, 2).T)
    povm = Rank1Povm(q.conj())
    prep = haar_vector(rng, 2, 3)
    j = choi_from_decomposition(povm, prep)
    v_mp = eb_membership(j, in_dim=2, out_dim=2, seed=_sub(seed, 9, 3))
    recon = float(np.abs(v_mp.reconstructed_choi() - j).max()) if v_mp.verdict == "member" else math.inf
    pt = v_id.evidence["ppt_min_eig"]
    ok = v_rep.verdict == "member" and v_id.verdict == "non_member" and abs(pt + 0.5) <= 1e-10 and recon <= 1e-6
    return _result(9, "EB membership", ok, replace=v_rep.verdict, identity=v_id.verdict, identity_pt_min_eig=pt,
                   measure_prepare=v_mp.verdict, reconstruction_error=recon)


def criterion_10(seed: int) -> dict:
    """Theorem 1 formula layer and its consistency with the built specs."""
    cases = []
    ok = True
    for d, eps, delta, want_delta, want_bound in (
        (21, 0.0, 0.04, 0.36, 10 * math.log2(1 / 0.36) - 2 * math.log2(21)),
        (2, 0.25, 0.0, 0.4375, 0.5 * math.log2(1 / 0.4375) - 2),
        (3, 0.0, 0.0, 0.0, math.inf),
    ):
        tb = dis.theorem_lower_bound(d, eps, delta)
        good = abs(tb.delta_quantity - want_delta) <= 1e-12 and (
            tb.log2_D_lower == want_bound if math.isinf(want_bound) else abs(tb.log2_D_lower - want_bound) <= 1e-12
        )
        ok &= good
        cases.append({"d": d, "eps": eps, "delta": delta, "Delta": tb.delta_quantity, "bound": tb.log2_D_lower,
                      "vacuous": tb.vacuous})
    rejected = 0
    for eps, delta in ((1.0, 0.0), (0.5, 0.25), (0.2, 0.81)):
        try:
            dis.theorem_lower_bound(2, eps, delta)
        except ValueError:
            rejected += 1
    ok &= rejected == 3
    specs = [_octahedron_spec(_sub(seed, 10)), dis.build_definetti_disentangler(2, 8)]
    consistency = []
    for spec in specs:
        tb = dis.theorem_lower_bound(spec.d, spec.eps_claim, spec.delta_claim)
        holds = tb.log2_D_lower <= 0 or spec.log2_D >= tb.log2_D_lower
        ok &= holds
        consistency.append({"kind": spec.kind, "log2_D": spec.log2_D, "bound": tb.log2_D_lower, "holds": holds})
    return _result(10, "Theorem 1 formula layer", ok, cases=cases, rejected_violations=rejected,
                   spec_consistency=consistency)


def criterion_11(seed: int) -> dict:
    """Negative controls fail, and the CLI reports the failure with exit code 1."""
    from .cli import main

    rep = dis.verify_condition1(dis.identity_spec(2), trials=3, seed=_sub(seed, 11), restarts=SUITE_RESTARTS)
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(["disent", "verify", "--kind", "identity", "--checks", "c1", "--trials", "3",
                     "--seed", str(_sub(seed, 11))])
    ok = (not rep.passed) and abs(rep.worst_observed - 0.5) <= 5e-3 and code == 1
    return _result(11, "Negative controls", ok, identity_c1_worst=rep.worst_observed, identity_passed=rep.passed,
                   cli_exit_code=code)


CRITERIA = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
    criterion_11,
]


def run_suite(seed: int = 42, only: list[int] | None = None) -> dict:
    """Run the criteria (all by default) and return the aggregate report."""
    results = []
    for i, crit in enumerate(CRITERIA, 1):
        if only is not None and i not in only:
            continue
        start = time.perf_counter()
        results.append(crit(seed))
        # timings go to the log only, never into the report
        log.info("criterion %d %s in %.1f s", i, "passed" if results[-1]["passed"] else "FAILED",
                 time.perf_counter() - start)
    return {"suite": "acceptance", "seed": seed, "criteria": results,
            "passed": all(r["passed"] for r in results)}
