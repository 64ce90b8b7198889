"""Separability toolkit.

Heuristic estimators for the distance and fidelity between a bipartite state
and the separable set, the PPT test, entanglement-breaking Choi membership and
measure-and-prepare channels.  Every optimisation over SEP here is a see-saw or
Frank-Wolfe heuristic; each result says which side of the true value it bounds:

* :func:`nearest_sep_trace_ub` returns an explicit separable state, so its
  distance is an upper bound on min_SEP T.
* :func:`seesaw_sep_fidelity` and :func:`lemma2_rhs` return achieved values,
  so both are lower bounds on max_SEP F.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, nnls

from ._simplex import fit_simplex
from .metrics import fidelity, purify, trace_distance
from .qcore import (
    DimensionError,
    KrausChannel,
    PureState,
    _matrix,
    choi_matrix,
    derive_seed,
    haar_vector,
    make_rng,
    matrix_from_json,
    matrix_to_json,
    parallel_map,
    polar_unitary,
    ptrace,
    ptranspose,
    psd_sqrt,
)

POLISH_ROUNDS = 4
DEFAULTS = {"restarts": 20, "iters": 500, "tol": 1e-9}


# ---------------------------------------------------------------------------
# types


@dataclass
class SepEnsemble:
    """sigma = sum_i w_i |a_i><a_i| (x) |b_i><b_i| with unit vectors a_i in C^dA, b_i in C^dB."""

    weights: np.ndarray
    parts_a: np.ndarray
    parts_b: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        a = np.asarray(self.parts_a, dtype=np.complex128)
        b = np.asarray(self.parts_b, dtype=np.complex128)
        if not (w.shape[0] == a.shape[0] == b.shape[0]):
            raise ValueError("weights and parts must have the same length")
        if (w < -1e-12).any() or abs(w.sum() - 1) > 1e-9:
            raise ValueError("weights must form a probability vector")
        cap = (a.shape[1] * b.shape[1]) ** 2
        if w.shape[0] > cap:
            raise ValueError(f"ensemble size {w.shape[0]} exceeds the Caratheodory cap {cap}")
        self.weights = np.clip(w, 0, None) / np.clip(w, 0, None).sum()
        self.parts_a = a / np.linalg.norm(a, axis=1, keepdims=True)
        self.parts_b = b / np.linalg.norm(b, axis=1, keepdims=True)

    @property
    def dims(self) -> tuple[int, int]:
        return self.parts_a.shape[1], self.parts_b.shape[1]

    def __len__(self) -> int:
        return self.weights.shape[0]

    def product_vectors(self) -> np.ndarray:
        return np.einsum("ia,ib->iab", self.parts_a, self.parts_b).reshape(len(self), -1)

    def as_density(self) -> np.ndarray:
        x = self.product_vectors()
        return (x.T * self.weights) @ x.conj()

    def to_json(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "parts_a": [matrix_to_json(v) for v in self.parts_a],
            "parts_b": [matrix_to_json(v) for v in self.parts_b],
        }

    @classmethod
    def from_json(cls, obj) -> "SepEnsemble":
        if isinstance(obj, str):
            obj = json.loads(obj)
        a = np.stack([matrix_from_json(v)[0].reshape(-1) for v in obj["parts_a"]])
        b = np.stack([matrix_from_json(v)[0].reshape(-1) for v in obj["parts_b"]])
        return cls(np.asarray(obj["weights"]), a, b)


def random_sep_ensemble(d_a: int, d_b: int, size: int | None = None, seed=None) -> SepEnsemble:
    rng = make_rng(seed)
    size = size if size is not None else int(rng.integers(1, 5))
    w = rng.dirichlet(np.ones(size))
    return SepEnsemble(w, haar_vector(rng, d_a, size), haar_vector(rng, d_b, size))


@dataclass
class Rank1Povm:
    """Unnormalised vectors eta_i (rows) with sum_i |eta_i><eta_i| = I."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.complex128)
        closure = v.T @ v.conj()
        dev = np.abs(closure - np.eye(v.shape[1])).max()
        if dev > 1e-9:
            raise ValueError(f"POVM closure violated by {dev:.3g}")
        self.vectors = v

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def elements(self) -> np.ndarray:
        return np.einsum("ia,ib->iab", self.vectors, self.vectors.conj())

    def to_json(self) -> dict:
        return {"vectors": [matrix_to_json(v) for v in self.vectors]}

    @classmethod
    def from_json(cls, obj) -> "Rank1Povm":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(np.stack([matrix_from_json(v)[0].reshape(-1) for v in obj["vectors"]]))


def _bipartite(rho, dims) -> tuple[np.ndarray, int, int]:
    m = _matrix(rho)
    if dims is None:
        dims = getattr(rho, "factor_dims", None)
    if dims is None or len(dims) != 2:
        raise DimensionError("need a bipartite state with factor_dims [dA, dB]")
    d_a, d_b = int(dims[0]), int(dims[1])
    if d_a * d_b != m.shape[0]:
        raise DimensionError(f"dims {dims} do not match state dimension {m.shape[0]}")
    return (m + m.conj().T) / 2, d_a, d_b


def _top_vec(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return v[:, -1]


def _simplex_project(y: np.ndarray) -> np.ndarray:
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1
    idx = np.arange(1, y.size + 1)
    r = idx[u - css / idx > 0][-1]
    return np.clip(y - css[r - 1] / r, 0, None)


# ---------------------------------------------------------------------------
# product-state see-saw (linear objective)


def best_product(h: np.ndarray, d_a: int, d_b: int, rng=None, restarts: int = 3, iters: int = 100):
    """Approximately maximise <a b| H |a b> over unit product vectors by alternating top eigenvectors.

    Returns (value, a, b).  The first start is the best product approximation
    of the top eigenvector of H; the remaining starts are Haar random.
    """
    rng = make_rng(rng)
    t = h.reshape(d_a, d_b, d_a, d_b)
    top = _top_vec(h).reshape(d_a, d_b)
    u, _, vh = np.linalg.svd(top)
    starts = [vh[0].conj()]
    starts += list(haar_vector(rng, d_b, max(restarts - 1, 0)))
    best = (-np.inf, None, None)
    for b in starts:
        val = -np.inf
        for _ in range(iters):
            a = _top_vec(np.einsum("ibjc,b,c->ij", t, b.conj(), b))
            hb = np.einsum("ibjc,i,j->bc", t, a.conj(), a)
            b = _top_vec(hb)
            new = float(np.vdot(b, hb @ b).real)
            if new - val < 1e-13:
                val = max(val, new)
                break
            val = new
        if val > best[0]:
            best = (val, a, b)
    return best


# ---------------------------------------------------------------------------
# separable fitting in Hilbert-Schmidt norm


def _hvec(m: np.ndarray) -> np.ndarray:
    m = m.reshape(m.shape[0], -1) if m.ndim == 3 else m.reshape(1, -1)
    return np.concatenate([m.real, m.imag], axis=1)


def _nnls_weights(xs: np.ndarray, rho: np.ndarray) -> np.ndarray:
    atoms = np.einsum("ia,ib->iab", xs, xs.conj())
    a = _hvec(atoms).T
    # heavily weighted trace row keeps the weights on the simplex
    a = np.vstack([a, 1e3 * np.ones(xs.shape[0])])
    y = np.concatenate([_hvec(rho)[0], [1e3]])
    q, _ = nnls(a, y, maxiter=50 * a.shape[1])
    return q / q.sum() if q.sum() > 0 else np.full(q.size, 1 / q.size)


def _caratheodory(q: np.ndarray, xs: np.ndarray, cap: int) -> tuple[np.ndarray, np.ndarray]:
    """Drop atoms along null directions of the moment matrix until at most ``cap`` remain."""
    keep = q > 1e-14
    q, xs = q[keep], xs[keep]
    while q.size > cap:
        atoms = np.einsum("ia,ib->iab", xs, xs.conj())
        a = np.vstack([_hvec(atoms).T, np.ones(q.size)])
        z = np.linalg.svd(a)[2][-1]
        if (z > 0).sum() == 0:
            z = -z
        pos = z > 1e-14
        t = np.min(q[pos] / z[pos])
        q = q - t * z
        keep = q > 1e-14
        q, xs = q[keep], xs[keep]
    return q / q.sum(), xs


def _polish(q: np.ndarray, a: np.ndarray, b: np.ndarray, rho: np.ndarray, max_nfev: int = 100):
    """Local least-squares refinement of all atoms and weights in Hilbert-Schmidt norm.

    Uses unnormalised factors, sigma = sum_i x_i x_i^dag with x_i = a_i (x) b_i,
    so the weights are |a_i|^2 |b_i|^2 and the Jacobian is explicit.
    """
    s, d_a = a.shape
    d_b = b.shape[1]
    dim = d_a * d_b
    target = _hvec(rho)[0]
    eye_a, eye_b = np.eye(d_a), np.eye(d_b)

    def unpack(p):
        z = p[: 2 * s * d_a].reshape(2, s, d_a)
        w = p[2 * s * d_a :].reshape(2, s, d_b)
        return z[0] + 1j * z[1], w[0] + 1j * w[1]

    def resid(p):
        aa, bb = unpack(p)
        x = np.einsum("ia,ib->iab", aa, bb).reshape(s, dim)
        sig = x.T @ x.conj()
        return np.concatenate([_hvec(sig)[0] - target, [np.real(np.trace(sig)) - 1.0]])

    def jac(p):
        aa, bb = unpack(p)
        x = np.einsum("ia,ib->iab", aa, bb).reshape(s, dim)
        # directions u = e_k (x) b_i and a_i (x) e_l, each with a real and an imaginary copy
        ua = np.einsum("ka,ib->ikab", eye_a, bb).reshape(s, d_a, dim)
        ub = np.einsum("ia,lb->ilab", aa, eye_b).reshape(s, d_b, dim)
        cols = []
        for u in (ua, ub):
            for ph in (1.0, 1j):
                du = ph * u
                ds = np.einsum("ika,ib->ikab", du, x.conj())
                ds = ds + ds.conj().transpose(0, 1, 3, 2)
                flat = ds.reshape(-1, dim * dim)
                tr = np.einsum("ikaa->ik", ds).real.reshape(-1, 1)
                cols.append(np.hstack([flat.real, flat.imag, tr]))
        # parameter order: Re a, Im a, Re b, Im b
        return np.vstack(cols).T

    sa = np.sqrt(q)[:, None]
    p0 = np.concatenate([(sa * a).real.ravel(), (sa * a).imag.ravel(), b.real.ravel(), b.imag.ravel()])
    res = least_squares(resid, p0, jac=jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    aa, bb = unpack(res.x)
    na, nb = np.linalg.norm(aa, axis=1), np.linalg.norm(bb, axis=1)
    w = (na * nb) ** 2
    return w / w.sum(), aa / na[:, None], bb / nb[:, None]


def _polish_rounds(q, pa, pb, m, rounds: int | None = None):
    """Repeat :func:`_polish` while each call at least halves the residual."""
    x = np.einsum("ia,ib->iab", pa, pb).reshape(q.size, -1)
    res = np.linalg.norm(m - (x.T * q) @ x.conj())
    for _ in range(POLISH_ROUNDS if rounds is None else rounds):
        if res <= 1e-13:
            break
        q2, pa2, pb2 = _polish(q, pa, pb, m)
        x2 = np.einsum("ia,ib->iab", pa2, pb2).reshape(q2.size, -1)
        res2 = np.linalg.norm(m - (x2.T * q2) @ x2.conj())
        if res2 >= res:
            break
        halved = res2 <= 0.5 * res
        q, pa, pb, res = q2, pa2, pb2, res2
        if not halved:
            break
    return res, q, pa, pb


def _merge_atoms(q, xs, m, d_a, d_b, rng, overlap: float = 0.9):
    """Merge atoms with pairwise overlap above ``overlap`` into their best product approximation."""
    order = np.argsort(-q)
    free = np.ones(q.size, dtype=bool)
    merged = []
    for i in order:
        if not free[i]:
            continue
        members = free & (np.abs(xs.conj() @ xs[i]) ** 2 > overlap)
        members[i] = True
        free &= ~members
        h = (xs[members].T * q[members]) @ xs[members].conj()
        _, a, b = best_product(h, d_a, d_b, rng, restarts=1)
        merged.append(np.kron(a, b))
    if len(merged) == q.size:
        return None
    xs2 = np.array(merged)
    q2 = _nnls_weights(xs2, m)
    keep = q2 > 1e-14
    pa, pb = _split_products(xs2[keep], d_a, d_b)
    return q2[keep] / q2[keep].sum(), pa, pb


def fit_separable(rho, dims=None, iters: int = 200, restarts: int = 3, seed=0, tol: float = 1e-13, polish: bool = True) -> SepEnsemble:
    """Separable ensemble approximating ``rho`` in Hilbert-Schmidt norm.

    Fully corrective Frank-Wolfe: each round adds the product vector found by
    :func:`best_product` on the residual ``rho - sigma`` and re-solves the
    weights by NNLS; the atoms are finally refined jointly by least squares.
    For separable ``rho`` the residual typically reaches roundoff.
    """
    m, d_a, d_b = _bipartite(rho, dims)
    rng = make_rng(seed)
    short = _product_shortcut(m, d_a, d_b)
    if short is not None:
        return short
    cap = (d_a * d_b) ** 2
    val, a, b = best_product(m, d_a, d_b, rng, restarts)
    xs = np.kron(a, b)[None]
    q = np.ones(1)
    for _ in range(iters):
        sigma = (xs.T * q) @ xs.conj()
        resid = m - sigma
        val, a, b = best_product(resid, d_a, d_b, rng, restarts)
        gap = val - float(np.real(np.vdot(resid.ravel(), sigma.ravel())))
        if gap < tol:
            break
        xs = np.vstack([xs, np.kron(a, b)[None]])
        q = _nnls_weights(xs, m)
        q, xs = _caratheodory(q, xs, cap)
    keep = q > 1e-14
    q, xs = q[keep] / q[keep].sum(), xs[keep]
    pa, pb = _split_products(xs, d_a, d_b)
    res = np.linalg.norm(m - (xs.T * q) @ xs.conj())
    if polish and res > 1e-13:
        # Frank-Wolfe leaves clusters of near-identical atoms around each true one, which makes
        # the least-squares problem degenerate; merged ensembles are better conditioned
        best = (res, q, pa, pb)
        for overlap in (None, 0.9, 0.7, 0.5):
            start = (q, pa, pb) if overlap is None else _merge_atoms(q, xs, m, d_a, d_b, rng, overlap)
            if start is None:
                continue
            cand = _polish_rounds(*start, m)
            if cand[0] < best[0]:
                best = cand
            # stop once exact, or once the residual looks structural (entangled input)
            if best[0] <= 1e-10 or best[0] > 1e-3:
                break
        _, q, pa, pb = best
    return SepEnsemble(q, pa, pb)


def _split_products(xs: np.ndarray, d_a: int, d_b: int) -> tuple[np.ndarray, np.ndarray]:
    pa, pb = [], []
    for x in xs:
        u, sv, vh = np.linalg.svd(x.reshape(d_a, d_b))
        pa.append(u[:, 0] * sv[0])
        pb.append(vh[0])
    pa = np.array(pa)
    return pa / np.linalg.norm(pa, axis=1, keepdims=True), np.array(pb)


def _product_shortcut(m: np.ndarray, d_a: int, d_b: int) -> SepEnsemble | None:
    """Exact ensemble when rho = rho_A (x) rho_B (covers pure products and the maximally mixed state)."""
    ra = ptrace(m, (d_a, d_b), [1])
    rb = ptrace(m, (d_a, d_b), [0])
    if np.abs(np.kron(ra, rb) - m).max() > 1e-12:
        return None
    wa, va = np.linalg.eigh(ra)
    wb, vb = np.linalg.eigh(rb)
    ia = np.flatnonzero(wa > 1e-15)
    ib = np.flatnonzero(wb > 1e-15)
    w = np.outer(wa[ia], wb[ib]).ravel()
    pa = np.repeat(va[:, ia].T, ib.size, axis=0)
    pb = np.tile(vb[:, ib].T, (ia.size, 1))
    return SepEnsemble(w / w.sum(), pa, pb)


# ---------------------------------------------------------------------------
# trace distance to SEP


@dataclass
class SepDistance:
    """Upper bound on min_SEP T(rho, sigma) with the separable witness that achieves it."""

    dist_ub: float
    witness: SepEnsemble
    hs_dist: float = float("nan")
    rounds: int = 0
    bound: str = "upper"


def nearest_sep_trace_ub(rho, dims=None, restarts: int = 3, iters: int = 50, seed=0) -> SepDistance:
    """Upper bound on the trace distance from ``rho`` to the separable set.

    Starts from the Hilbert-Schmidt fit of :func:`fit_separable`, then runs
    Frank-Wolfe on the trace distance itself: the linear-minimisation oracle
    is a product-state see-saw on the sign operator ``sign(rho - sigma)``,
    followed by an away-step simplex refit of the weights over all atoms.
    """
    m, d_a, d_b = _bipartite(rho, dims)
    rng = make_rng(seed)
    ens = fit_separable(m, (d_a, d_b), restarts=restarts, seed=rng)
    sigma = ens.as_density()
    best = trace_distance(m, sigma)
    result = SepDistance(best, ens, best, 0)
    if best < 1e-12:
        return result
    xs = ens.product_vectors()
    q = ens.weights.copy()
    cap = (d_a * d_b) ** 2
    for r in range(1, iters + 1):
        w, v = np.linalg.eigh(m - sigma)
        s = (v * np.sign(w)) @ v.conj().T
        val, a, b = best_product(s, d_a, d_b, rng, restarts)
        gap = val - float(np.real(np.vdot(s.ravel(), sigma.ravel())))
        if gap < 1e-10:
            break
        xs = np.vstack([xs, np.kron(a, b)[None]])
        atoms = np.einsum("ia,ib->iab", xs, xs.conj())
        fit = fit_simplex(atoms, m, init=np.append(q, 0.0))
        q, xs = _caratheodory(fit.weights, xs, cap)
        sigma = (xs.T * q) @ xs.conj()
        val = trace_distance(m, sigma)
        if val < best - 1e-12:
            pa, pb = _split_products(xs, d_a, d_b)
            gain = (best - val) / best
            best = val
            result = SepDistance(best, SepEnsemble(q, pa, pb), result.hs_dist, r)
            if gain < 1e-3:
                break
        else:
            break
    return result


# ---------------------------------------------------------------------------
# fidelity to SEP by see-saw


@dataclass
class SepFidelity:
    """Lower bound on max_SEP F(rho, sigma) with its witness and per-sweep history."""

    f_lb: float
    witness: SepEnsemble
    history: list = field(default_factory=list)
    restart: int = 0
    bound: str = "lower"


class _FidelityObjective:
    def __init__(self, rho):
        self.sqrt_rho = psd_sqrt(rho)

    def value(self, sigma):
        m = self.sqrt_rho @ sigma @ self.sqrt_rho
        w = np.linalg.eigvalsh((m + m.conj().T) / 2)
        return float(np.sqrt(np.clip(w, 0, None)).sum() ** 2)

    def value_grad(self, sigma):
        """F and G with dF = 2 sqrt(F) tr(G dsigma)."""
        m = self.sqrt_rho @ sigma @ self.sqrt_rho
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        w = np.clip(w, 0, None)
        root = np.sqrt(w)
        floor = 1e-12 * max(w[-1], 1e-300)
        inv = np.where(w > floor, 1 / np.sqrt(np.maximum(w, floor)), 1 / np.sqrt(floor))
        g = self.sqrt_rho @ ((v * inv) @ v.conj().T) @ self.sqrt_rho
        return float(root.sum() ** 2), (g + g.conj().T) / 4


def _ensemble_sigma(p, a, b):
    x = np.einsum("ia,ib->iab", a, b).reshape(p.size, -1)
    return (x.T * p) @ x.conj()


def _seesaw_run(obj, m, d_a, d_b, p, a, b, iters, tol):
    sigma = _ensemble_sigma(p, a, b)
    f = obj.value(sigma)
    history = [f]
    step = 1.0
    for _ in range(iters):
        f_start = f
        for i in range(p.size):
            for side in (0, 1):
                f_cur, g = obj.value_grad(sigma)
                t = g.reshape(d_a, d_b, d_a, d_b)
                old = np.kron(a[i], b[i])
                if side == 0:
                    new_vec = _top_vec(np.einsum("ibjc,b,c->ij", t, b[i].conj(), b[i]))
                    cur = a[i]
                else:
                    new_vec = _top_vec(np.einsum("ibjc,i,j->bc", t, a[i].conj(), a[i]))
                    cur = b[i]
                # align phase with the current vector before damping
                ph = np.vdot(new_vec, cur)
                new_vec = new_vec * (ph / abs(ph) if abs(ph) > 1e-15 else 1.0)
                for damp in (1.0, 0.5, 0.25, 0.1):
                    cand = cur + damp * (new_vec - cur)
                    nrm = np.linalg.norm(cand)
                    if nrm < 1e-12:
                        continue
                    cand = cand / nrm
                    x_new = np.kron(cand, b[i]) if side == 0 else np.kron(a[i], cand)
                    sig_new = sigma + p[i] * (np.outer(x_new, x_new.conj()) - np.outer(old, old.conj()))
                    f_new = obj.value(sig_new)
                    if f_new > f:
                        if side == 0:
                            a[i] = cand
                        else:
                            b[i] = cand
                        sigma, f = sig_new, f_new
                        break
        # weights: projected ascent along <x_i| G |x_i> with backtracking
        f_cur, g = obj.value_grad(sigma)
        x = np.einsum("ia,ib->iab", a, b).reshape(p.size, -1)
        grad = np.einsum("ia,ab,ib->i", x.conj(), g, x).real
        while step > 1e-8:
            p_new = _simplex_project(p + step * (grad - grad.mean()) / max(np.abs(grad).max(), 1e-300))
            sig_new = (x.T * p_new) @ x.conj()
            f_new = obj.value(sig_new)
            if f_new > f:
                p, sigma, f = p_new, sig_new, f_new
                step = min(step * 2, 1.0)
                break
            step /= 2
        else:
            step = 1e-3
        if f < history[-1]:
            raise AssertionError("see-saw fidelity decreased")
        history.append(f)
        if f - f_start < tol:
            break
    return f, p, a, b, history


def seesaw_sep_fidelity(
    rho,
    dims=None,
    restarts: int = DEFAULTS["restarts"],
    iters: int = DEFAULTS["iters"],
    seed=0,
    size: int | None = None,
    tol: float = DEFAULTS["tol"],
    workers: int | None = None,
) -> SepFidelity:
    """Lower bound on max_{sigma in SEP} F(rho, sigma) by alternating optimisation.

    The separable candidate is an ensemble of ``size`` product states
    (default: the Caratheodory cap (dA dB)^2).  One sweep updates every
    element in turn: a_i (then b_i) becomes the top eigenvector of the
    fidelity gradient conditioned on b_i (a_i), and the weights take a
    projected ascent step.  Updates are accepted only when F increases, so F is
    non-decreasing across sweeps.  Restart 0 starts from the Hilbert-Schmidt
    separable fit of :func:`fit_separable`; the others are random.
    """
    m, d_a, d_b = _bipartite(rho, dims)
    short = _product_shortcut(m, d_a, d_b)
    if short is not None:
        return SepFidelity(1.0, short, [1.0])
    size = size or (d_a * d_b) ** 2
    obj = _FidelityObjective(m)

    def run(r):
        rng = make_rng(derive_seed(seed, r))
        if r == 0:
            ens = fit_separable(m, (d_a, d_b), seed=rng)
            k = len(ens)
            idx = np.arange(size) % k
            extra = (np.arange(size) >= k)[:, None]
            # perturbed copies fill the ensemble up to ``size`` with almost no weight
            a = ens.parts_a[idx] + 0.05 * extra * haar_vector(rng, d_a, size)
            b = ens.parts_b[idx] + 0.05 * extra * haar_vector(rng, d_b, size)
            a /= np.linalg.norm(a, axis=1, keepdims=True)
            b /= np.linalg.norm(b, axis=1, keepdims=True)
            p = np.where(extra[:, 0], 1e-6, ens.weights[idx])
            p /= p.sum()
        else:
            a = haar_vector(rng, d_a, size)
            b = haar_vector(rng, d_b, size)
            p = rng.dirichlet(np.ones(size))
        f, p, a, b, hist = _seesaw_run(obj, m, d_a, d_b, p, a, b, iters, tol)
        return f, r, p, a, b, hist

    results = parallel_map(run, list(range(max(restarts, 1))), workers)
    f, r, p, a, b, hist = max(results, key=lambda t: (t[0], -t[1]))
    # report the witness fidelity at full accuracy rather than the internal objective
    witness = SepEnsemble(p, a, b)
    return SepFidelity(min(fidelity(m, witness.as_density()), 1.0), witness, hist, r)


# ---------------------------------------------------------------------------
# Lemma-2 form: purification + rank-1 POVM


@dataclass
class Lemma2Result:
    value: float
    povm: np.ndarray
    states: np.ndarray
    history: list = field(default_factory=list)
    restart: int = 0
    bound: str = "lower"


def lemma2_rhs(
    rho,
    dims=None,
    r: int | None = None,
    restarts: int = DEFAULTS["restarts"],
    iters: int = DEFAULTS["iters"],
    seed=0,
    tol: float = DEFAULTS["tol"],
    workers: int | None = None,
) -> Lemma2Result:
    """Maximise sum_i tr[(psi_i (x) M_i) Phi_BE] over r-outcome rank-1 POVMs and pure states.

    Phi_ABE purifies ``rho`` with E = C^{dA dB}.  With the POVM fixed, each
    psi_i is the top eigenvector of <w_i| Phi_BE |w_i>; with the states fixed,
    the objective is a convex quadratic in the co-isometry W = [w_1 ... w_r],
    so the polar factor of its gradient is an ascent step that keeps
    W W^dag = I exactly (W^dag W = I when r < dim E).  Returns the best value
    over restarts, a lower bound on the maximum.
    """
    m, d_a, d_b = _bipartite(rho, dims)
    d_e = d_a * d_b
    r = d_e if r is None else int(r)
    if r < 1:
        raise ValueError("r must be >= 1")
    phi = purify(m).amplitudes
    phi_be = ptrace(np.outer(phi, phi.conj()), (d_a, d_b, d_e), [0])
    t = phi_be.reshape(d_b, d_e, d_b, d_e)

    def objective(w, psi):
        return float(np.einsum("ib,ie,becf,ic,if->", psi.conj(), w.conj(), t, psi, w).real)

    def run(k):
        rng = make_rng(derive_seed(seed, k))
        g = rng.standard_normal((d_e, r)) + 1j * rng.standard_normal((d_e, r))
        w = polar_unitary(g).T  # rows are w_i
        psi = np.array([_top_vec(np.einsum("e,becf,f->bc", wi.conj(), t, wi)) for wi in w])
        val = objective(w, psi)
        hist = [val]
        for _ in range(iters):
            q = np.einsum("ib,becf,ic->ief", psi.conj(), t, psi)
            grad = np.einsum("ief,if->ie", q, w)
            w_new = polar_unitary(grad.T).T
            if objective(w_new, psi) < val:
                w_new = w
            psi_new = np.array([_top_vec(np.einsum("e,becf,f->bc", wi.conj(), t, wi)) for wi in w_new])
            new = objective(w_new, psi_new)
            if new < val - 1e-13:
                raise AssertionError("lemma-2 alternation decreased")
            w, psi = w_new, psi_new
            hist.append(new)
            if new - val < tol:
                val = max(val, new)
                break
            val = new
        return val, k, w, psi, hist

    results = parallel_map(run, list(range(max(restarts, 1))), workers)
    val, k, w, psi, hist = max(results, key=lambda x: (x[0], -x[1]))
    return Lemma2Result(val, w, psi, hist, k)


# ---------------------------------------------------------------------------
# PPT, EB membership, measure-and-prepare


def ppt_min_eig(rho, dims=None, cut: int = 1) -> float:
    """Smallest eigenvalue of the partial transpose on factor ``cut`` (0 or 1)."""
    m, d_a, d_b = _bipartite(rho, dims)
    if cut not in (0, 1):
        raise ValueError(f"cut must be 0 or 1, got {cut}")
    pt = ptranspose(m, (d_a, d_b), [cut])
    return float(np.linalg.eigvalsh((pt + pt.conj().T) / 2)[0])


def measure_prepare_channel(povm: Rank1Povm, prep) -> KrausChannel:
    """rho -> sum_i <eta_i| rho |eta_i> psi_i, Kraus operators |psi_i><eta_i|."""
    if not isinstance(povm, Rank1Povm):
        povm = Rank1Povm(povm)
    prep = np.stack([np.asarray(getattr(p, "amplitudes", p), dtype=np.complex128) for p in prep])
    if prep.shape[0] != povm.vectors.shape[0]:
        raise ValueError("POVM and preparation lists differ in length")
    kraus = np.einsum("ib,ie->ibe", prep, povm.vectors.conj())
    return KrausChannel(kraus)


@dataclass
class EBVerdict:
    verdict: str
    evidence: dict
    povm: Rank1Povm | None = None
    prep: np.ndarray | None = None

    def reconstructed_choi(self) -> np.ndarray:
        """sum_i eta_i^T (x) psi_i from the recovered decomposition."""
        eta = self.povm.vectors
        return np.einsum("ia,ib,ic,id->acbd", eta.conj(), eta, self.prep, self.prep.conj()).reshape(
            eta.shape[1] * self.prep.shape[1], -1
        )


def eb_membership(choi, tol: float = 1e-6, in_dim: int | None = None, out_dim: int | None = None, seed=0) -> EBVerdict:
    """Decide whether a Choi matrix belongs to an entanglement-breaking channel.

    ``sigma = J / dim_in`` must have maximally mixed input marginal and be
    separable.  A negative partial transpose proves non-membership; a
    separable fit with F(sigma, fit) >= 1 - tol whose recovered measure-and-
    prepare form reproduces J within 1e-6 proves membership; anything else is
    reported as inconclusive.
    """
    j = _matrix(choi)
    d_in = in_dim or getattr(choi, "in_dim")
    d_out = out_dim or getattr(choi, "out_dim")
    sigma = j / d_in
    marg = ptrace(sigma, (d_in, d_out), [1])
    marg_dev = float(np.abs(marg - np.eye(d_in) / d_in).max())
    evidence = {"marginal_deviation": marg_dev}
    if marg_dev > tol:
        evidence["reason"] = "input marginal is not maximally mixed"
        return EBVerdict("non_member", evidence)
    pt = ppt_min_eig(sigma, (d_in, d_out), cut=1)
    evidence["ppt_min_eig"] = pt
    if pt < -max(tol * 1e-3, 1e-9):
        evidence["reason"] = "negative partial transpose"
        return EBVerdict("non_member", evidence)
    ens = fit_separable(sigma, (d_in, d_out), seed=seed)
    fit = ens.as_density()
    f = fidelity(sigma, fit)
    evidence["fit_fidelity"] = f
    evidence["fit_size"] = len(ens)
    # sigma_fit = sum p_i a_i a_i^dag (x) b_i b_i^dag  ->  eta_i = sqrt(d_in p_i) conj(a_i)
    eta = np.sqrt(d_in * ens.weights)[:, None] * ens.parts_a.conj()
    closure = eta.T @ eta.conj()
    fix = np.linalg.inv(psd_sqrt(closure))
    eta = eta @ fix.T
    povm = Rank1Povm(eta)
    verdict = EBVerdict("inconclusive", evidence, povm, ens.parts_b)
    recon_err = float(np.abs(verdict.reconstructed_choi() - j).max())
    evidence["reconstruction_error"] = recon_err
    if f >= 1 - tol and recon_err <= 1e-6:
        verdict.verdict = "member"
    else:
        evidence["reason"] = "separable fit not tight enough"
    return verdict


def choi_from_decomposition(povm: Rank1Povm, prep) -> np.ndarray:
    """Choi matrix of the measure-and-prepare channel built from ``povm`` and ``prep``."""
    return choi_matrix(measure_prepare_channel(povm, prep).kraus)
