"""Independent reference computations used by the tests.

These deliberately avoid the package's own algorithms: explicit loops for
partial operations, permutation matrices for the symmetric projector, and a
semidefinite program for the separable fidelity of two-qubit states (where
PPT coincides with separability).
"""

import itertools
import math

import numpy as np


def ptrace_loop(rho, d_a, d_b, keep="A"):
    out = np.zeros((d_a, d_a) if keep == "A" else (d_b, d_b), dtype=complex)
    for i, j, k in itertools.product(range(d_a), range(d_a), range(d_b)):
        if keep == "A":
            out[i, j] += rho[i * d_b + k, j * d_b + k]
    if keep == "B":
        for i, j, k in itertools.product(range(d_b), range(d_b), range(d_a)):
            out[i, j] += rho[k * d_b + i, k * d_b + j]
    return out


def ptranspose_b_loop(rho, d_a, d_b):
    out = np.zeros_like(rho)
    for i, j, k, l in itertools.product(range(d_a), range(d_a), range(d_b), range(d_b)):
        out[i * d_b + k, j * d_b + l] = rho[i * d_b + l, j * d_b + k]
    return out


def permutation_operator(perm, d):
    """Unitary permuting n tensor factors of C^d: factor i goes to position perm[i]."""
    n = len(perm)
    dim = d**n
    p = np.zeros((dim, dim))
    for idx in itertools.product(range(d), repeat=n):
        new = [0] * n
        for i, x in enumerate(idx):
            new[perm[i]] = x
        src = int(np.ravel_multi_index(idx, (d,) * n))
        dst = int(np.ravel_multi_index(new, (d,) * n))
        p[dst, src] = 1
    return p


def sym_projector(d, n):
    return sum(permutation_operator(p, d) for p in itertools.permutations(range(n))) / math.factorial(n)


def ppt_max_fidelity(rho, dims=(2, 2)):
    """max F(rho, sigma) over PPT sigma, as the SDP max Re tr X s.t. [[rho, X], [X^dag, S]] >= 0."""
    import cvxpy as cp

    n = rho.shape[0]
    d_a, d_b = dims
    x = cp.Variable((n, n), complex=True)
    s = cp.Variable((n, n), hermitian=True)
    blocks = [[s[i * d_b:(i + 1) * d_b, j * d_b:(j + 1) * d_b].T for j in range(d_a)] for i in range(d_a)]
    cons = [cp.bmat([[rho, x], [x.H, s]]) >> 0, cp.trace(s) == 1, s >> 0, cp.bmat(blocks) >> 0]
    prob = cp.Problem(cp.Maximize(cp.real(cp.trace(x))), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value**2


def qubit_fidelity(rho, sigma):
    """F = tr(rho sigma) + 2 sqrt(det rho det sigma) for 2x2 density matrices."""
    det = np.linalg.det(rho).real * np.linalg.det(sigma).real
    return float(np.trace(rho @ sigma).real + 2 * math.sqrt(max(det, 0.0)))


def bloch(rho):
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    return np.array([np.trace(rho @ p).real for p in paulis])
