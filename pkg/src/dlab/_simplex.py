"""Away-step Frank-Wolfe for min_q T(sum_i q_i A_i, target) over the probability simplex."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar


@dataclass
class SimplexFit:
    distance: float
    weights: np.ndarray
    iterations: int
    converged: bool


def _sign_op(diff: np.ndarray, zero_tol: float = 1e-13) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh(diff)
    s = np.where(np.abs(w) <= zero_tol, 0.0, np.sign(w))
    return 0.5 * float(np.abs(w).sum()), (v * s) @ v.conj().T


def _tdist(diff: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def fit_simplex(
    atoms: np.ndarray,
    target: np.ndarray,
    iters: int = 500,
    tol: float = 1e-8,
    init: np.ndarray | None = None,
) -> SimplexFit:
    """Minimise the trace distance between ``target`` and a convex combination of ``atoms``.

    ``atoms`` has shape (m, D, D).  The linear-minimisation step selects the atom
    most negatively aligned with the subgradient ``sign(sigma - target)/2``;
    away steps shrink the worst active atom.  Step sizes come from an exact
    (bounded scalar) line search on the convex one-dimensional restriction.
    The result is an upper bound on the true minimum.
    """
    atoms = np.asarray(atoms)
    m = atoms.shape[0]
    flat = atoms.reshape(m, -1)
    if init is None:
        # start from the single best atom
        dists = [_tdist(a - target) for a in atoms]
        q = np.zeros(m)
        q[int(np.argmin(dists))] = 1.0
    else:
        q = np.asarray(init, dtype=float).copy()
    sigma = np.tensordot(q, atoms, axes=1)
    val, s = _sign_op(sigma - target)
    best_q, best_val = q.copy(), val
    converged = False
    it = 0
    for it in range(1, iters + 1):
        if val <= 1e-15:
            converged = True
            break
        # g_i = tr(S A_i) / 2 ; S Hermitian so the trace is real
        g = 0.5 * (flat @ s.T.reshape(-1)).real
        i_fw = int(np.argmin(g))
        active = np.flatnonzero(q > 0)
        i_aw = int(active[np.argmax(g[active])])
        gq = float(g @ q)
        fw_gap = gq - g[i_fw]
        aw_gap = g[i_aw] - gq
        if fw_gap <= 1e-14 and aw_gap <= 1e-14:
            converged = True
            break
        if fw_gap >= aw_gap:
            direction = atoms[i_fw] - sigma
            gmax = 1.0
            mode = "fw"
        else:
            direction = sigma - atoms[i_aw]
            gmax = q[i_aw] / (1.0 - q[i_aw]) if q[i_aw] < 1.0 else 0.0
            mode = "away"
        if gmax <= 0:
            converged = True
            break
        base = sigma - target
        res = minimize_scalar(
            lambda t: _tdist(base + t * direction),
            bounds=(0.0, gmax),
            method="bounded",
            options={"xatol": 1e-12 * max(1.0, gmax)},
        )
        gamma = float(res.x)
        # the bounded search never evaluates the endpoints themselves
        end_val = _tdist(base + gmax * direction)
        if end_val <= res.fun:
            gamma = gmax
        if mode == "fw":
            q *= 1.0 - gamma
            q[i_fw] += gamma
        else:
            q *= 1.0 + gamma
            q[i_aw] -= gamma
            if gamma == gmax:
                q[i_aw] = 0.0
        q = np.clip(q, 0.0, None)
        q /= q.sum()
        sigma = np.tensordot(q, atoms, axes=1)
        new_val, s = _sign_op(sigma - target)
        improvement = val - new_val
        val = new_val
        if val < best_val:
            best_val, best_q = val, q.copy()
        if abs(improvement) < tol and mode == "fw":
            converged = True
            break
    return SimplexFit(best_val, best_q, it, converged)
