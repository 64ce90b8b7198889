"""Symmetric subspace of (C^d)^{(x)n} and numerical de Finetti fits.

The isometry U maps the occupation-number basis of the symmetric subspace
into (C^d)^{(x)n}.  Reduced states tr_{[n-k]}[(U (x) I) rho (U (x) I)^dag] are
computed from the eigenvectors of ``rho`` without forming any d^n x d^n
matrix.  Index layout of embedded vectors is (copy_1, ..., copy_n, aux),
row-major.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._simplex import fit_simplex
from .qcore import DensityOp, DimensionError, _matrix, ginibre, make_rng, ptrace
from .purenet import PureNet, default_net

SYM_DIM_CAP = 1_000_000
EMBED_CAP = 4_000_000


class CapExceeded(RuntimeError):
    """Raised when a requested object is beyond desk-scale caps."""


def sym_dimension(d: int, n: int, cap: int = SYM_DIM_CAP) -> int:
    """dim of the symmetric subspace, C(n+d-1, d-1)."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be >= 1")
    dim = math.comb(n + d - 1, d - 1)
    if dim > cap:
        raise CapExceeded(f"desk-scale exceeded: symmetric dimension {dim} > {cap}")
    return dim


def occupations(d: int, n: int) -> list[tuple[int, ...]]:
    """All d-tuples of non-negative integers summing to n, in lexicographic order."""
    out = []
    for bars in itertools.combinations(range(n + d - 1), d - 1):
        prev = -1
        occ = []
        for b in bars:
            occ.append(b - prev - 1)
            prev = b
        occ.append(n + d - 2 - prev)
        out.append(tuple(occ))
    return sorted(out)


def multinomial(occ) -> int:
    out = math.factorial(sum(occ))
    for m in occ:
        out //= math.factorial(m)
    return out


@dataclass(frozen=True)
class SymBasis:
    d: int
    n: int
    occupations: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.occupations)

    def index(self, occ) -> int:
        return self.occupations.index(tuple(occ))


def sym_basis(d: int, n: int) -> SymBasis:
    sym_dimension(d, n)
    return SymBasis(d, n, tuple(occupations(d, n)))


@dataclass(frozen=True)
class SymIsometry:
    """Isometry from C^{dim} onto the symmetric subspace; ``matrix`` has shape (d^n, dim)."""

    basis: SymBasis
    matrix: np.ndarray


def _string_occupations(d: int, n: int) -> np.ndarray:
    digits = np.array(list(itertools.product(range(d), repeat=n)), dtype=np.int64).reshape(-1, n)
    return np.stack([(digits == a).sum(axis=1) for a in range(d)], axis=1)


@functools.lru_cache(maxsize=32)
def _isometry(d: int, n: int, embed_cap: int) -> SymIsometry:
    basis = sym_basis(d, n)
    if d**n > embed_cap:
        raise CapExceeded(f"desk-scale exceeded: embedding length {d**n} > {embed_cap}")
    occ = _string_occupations(d, n)
    lookup = {o: i for i, o in enumerate(basis.occupations)}
    cols = np.array([lookup[tuple(o)] for o in occ])
    norms = np.array([1 / math.sqrt(multinomial(o)) for o in basis.occupations])
    u = np.zeros((d**n, basis.dim), dtype=np.complex128)
    u[np.arange(d**n), cols] = norms[cols]
    u.setflags(write=False)
    return SymIsometry(basis, u)


def sym_isometry(d: int, n: int, embed_cap: int = EMBED_CAP) -> SymIsometry:
    """U: columns are normalised symmetrisations of occupation-number basis vectors."""
    return _isometry(int(d), int(n), int(embed_cap))


def sym_coordinates(phi, n: int) -> np.ndarray:
    """Coordinates of phi^{(x)n} in the occupation basis: sqrt(multinomial(m)) prod_i phi_i^{m_i}."""
    phi = np.asarray(getattr(phi, "amplitudes", phi), dtype=np.complex128)
    basis = sym_basis(phi.size, n)
    out = np.empty(basis.dim, dtype=np.complex128)
    for j, occ in enumerate(basis.occupations):
        out[j] = math.sqrt(multinomial(occ)) * np.prod(phi ** np.array(occ))
    return out


def embed_product(phi, n: int, aux=None) -> np.ndarray:
    """Vector of the input space C^{sym_dim} (x) C^{aux} whose embedding is phi^{(x)n} (x) aux."""
    c = sym_coordinates(phi, n)
    if aux is None:
        return c
    aux = np.asarray(getattr(aux, "amplitudes", aux), dtype=np.complex128)
    return np.kron(c, aux)


def reduce_symmetric(rho_small, d: int, n: int, k: int, aux_dim: int = 1, embed_cap: int = EMBED_CAP) -> np.ndarray:
    """tr_{[n-k]}[(U (x) I_aux) rho (U (x) I_aux)^dag] for rho on C^{sym_dim} (x) C^{aux}.

    Each eigenvector x of ``rho`` is embedded as (U (x) I)x, reshaped into a
    (d^{n-k}) x (d^k * aux) matrix M, and contributes lambda * M^T conj(M).
    Works for Hermitian (not necessarily PSD) inputs as well.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    m = _matrix(rho_small)
    iso = sym_isometry(d, n, embed_cap)
    dim = iso.basis.dim
    if m.shape != (dim * aux_dim, dim * aux_dim):
        raise DimensionError(f"input shape {m.shape} does not match sym dim {dim} x aux {aux_dim}")
    if d**n * aux_dim > embed_cap:
        raise CapExceeded(f"desk-scale exceeded: embedding length {d**n * aux_dim} > {embed_cap}")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    keep = np.abs(w) > 1e-15
    w, v = w[keep], v[:, keep]
    # (U (x) I) v for all eigenvectors at once: (dim, aux, r) -> (d^n, aux, r)
    emb = np.einsum("sj,jar->sar", iso.matrix, v.reshape(dim, aux_dim, -1))
    emb = emb.reshape(d ** (n - k), d**k * aux_dim, -1)
    out = np.einsum("tar,tbr,r->ab", emb, emb.conj(), w)
    return (out + out.conj().T) / 2


def random_symmetric_state(d: int, n: int, aux_dim: int = 1, rank: int | None = None, seed=None) -> np.ndarray:
    """Ginibre random density matrix on C^{sym_dim} (x) C^{aux} (pure when rank=1)."""
    dim = sym_dimension(d, n) * aux_dim
    rank = dim if rank is None else rank
    g = ginibre(make_rng(seed), dim, rank)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@dataclass
class IIDMixture:
    """sum_i w_i phi_i^{(x)k} (x) aux_states_i; ``aux_states`` is None for plain i.i.d. mixtures."""

    support: np.ndarray
    weights: np.ndarray
    k: int
    aux_states: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if (w < -1e-12).any() or abs(w.sum() - 1) > 1e-9:
            raise ValueError("mixture weights must form a probability vector")

    def as_matrix(self) -> np.ndarray:
        atoms = iid_atoms(self.support, self.k)
        if self.aux_states is not None:
            atoms = np.stack([np.kron(a, s) for a, s in zip(atoms, self.aux_states)])
        return np.tensordot(self.weights, atoms, axes=1)

    def pruned(self, tol: float = 0.0) -> "IIDMixture":
        keep = self.weights > tol
        aux = None if self.aux_states is None else self.aux_states[keep]
        return IIDMixture(self.support[keep], self.weights[keep] / self.weights[keep].sum(), self.k, aux)


def iid_atoms(points: np.ndarray, k: int) -> np.ndarray:
    """phi^{(x)k} projectors for each row of ``points``."""
    vecs = points
    for _ in range(k - 1):
        vecs = np.einsum("ia,ib->iab", vecs, points).reshape(points.shape[0], -1)
    return np.einsum("ia,ib->iab", vecs, vecs.conj())


@dataclass(frozen=True)
class DeFinettiFit:
    distance: float
    mixture: IIDMixture
    converged: bool
    net_radius: float | None


def _net_or_default(net: PureNet | None, d: int) -> PureNet:
    return default_net(d) if net is None else net


def definetti_fit(rho_red, net: PureNet | None = None, k: int | None = None, iters: int = 500) -> DeFinettiFit:
    """Upper bound on the distance from ``rho_red`` to i.i.d. mixtures sum q(phi) phi^{(x)k} over ``net``.

    The net's certified (or nominal) radius is reported with the result since a
    coarse net inflates the distance.
    """
    m = _matrix(rho_red)
    d = net.dim if net is not None else None
    if k is None:
        if d is None:
            raise ValueError("give either a net or k")
        k = round(math.log(m.shape[0], d))
    if d is None:
        d = round(m.shape[0] ** (1 / k))
        net = _net_or_default(None, d)
    if d**k != m.shape[0]:
        raise DimensionError(f"state dim {m.shape[0]} is not {d}^{k}")
    atoms = iid_atoms(net.points, k)
    fit = fit_simplex(atoms, m, iters=iters)
    mix = IIDMixture(net.points, fit.weights, k)
    return DeFinettiFit(fit.distance, mix, fit.converged, net.certified_radius or net.nominal_radius)


def _project_density(h: np.ndarray) -> np.ndarray:
    """Euclidean projection of a Hermitian matrix onto density matrices."""
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1
    idx = np.arange(1, u.size + 1)
    rho_ = idx[u - css / idx > 0][-1]
    theta = css[rho_ - 1] / rho_
    w = np.clip(w - theta, 0, None)
    return (v * w) @ v.conj().T


def _tdist(a: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a)).sum())


def definetti_fit_general(
    rho_red,
    net: PureNet | None = None,
    k: int = 1,
    aux_dim: int = 1,
    iters: int = 500,
    rounds: int = 20,
) -> DeFinettiFit:
    """Fit ``rho_red`` on (C^d)^{(x)k} (x) C^aux by sum q(phi) phi^{(x)k} (x) sigma(phi).

    Alternates between (a) a simplex fit of the weights with the aux states
    fixed and (b) one projected subgradient step on each aux state with
    positive weight, kept only if it lowers the distance.  Aux states start as
    the normalised conditional states <phi^k| rho |phi^k>.  With ``aux_dim == 1``
    this is exactly :func:`definetti_fit`.
    """
    m = _matrix(rho_red)
    if aux_dim == 1:
        return definetti_fit(m, net, k, iters)
    if net is None:
        d = round((m.shape[0] // aux_dim) ** (1 / k))
        net = default_net(d)
    d = net.dim
    dk = d**k
    if dk * aux_dim != m.shape[0]:
        raise DimensionError(f"state dim {m.shape[0]} != {d}^{k} * {aux_dim}")
    vecs = net.points
    for _ in range(k - 1):
        vecs = np.einsum("ia,ib->iab", vecs, net.points).reshape(len(net), -1)
    t = m.reshape(dk, aux_dim, dk, aux_dim)
    cond = np.einsum("ia,axby,ib->ixy", vecs.conj(), t, vecs)
    tr = np.einsum("ixx->i", cond).real
    aux = np.empty_like(cond)
    for i in range(len(net)):
        aux[i] = cond[i] / tr[i] if tr[i] > 1e-12 else np.eye(aux_dim) / aux_dim
    base = iid_atoms(net.points, k)

    def atoms_of(aux_states):
        return np.einsum("iab,ixy->iaxby", base, aux_states).reshape(len(net), dk * aux_dim, dk * aux_dim)

    fit = fit_simplex(atoms_of(aux), m, iters=iters)
    q, best = fit.weights, fit.distance
    converged = fit.converged
    step = 0.5
    for _ in range(rounds):
        improved = False
        sigma = np.tensordot(q, atoms_of(aux), axes=1)
        w, v = np.linalg.eigh(sigma - m)
        s = (v * np.sign(w)) @ v.conj().T
        s4 = s.reshape(dk, aux_dim, dk, aux_dim)
        for i in np.flatnonzero(q > 1e-12):
            # d T / d sigma_i = q_i <phi^k| S |phi^k> / 2
            g = np.einsum("a,axby,b->xy", vecs[i].conj(), s4, vecs[i])
            cand = _project_density(aux[i] - step * g)
            delta = q[i] * np.kron(base[i], cand - aux[i])
            val = _tdist(sigma + delta - m)
            if val < best - 1e-12:
                aux[i] = cand
                sigma = sigma + delta
                best = val
                improved = True
        refit = fit_simplex(atoms_of(aux), m, iters=iters, init=q)
        if refit.distance < best:
            q, best = refit.weights, refit.distance
            improved = True
        if not improved:
            step /= 2
            if step < 1e-4:
                break
    mix = IIDMixture(net.points, q, k, aux)
    return DeFinettiFit(best, mix, converged, net.certified_radius or net.nominal_radius)
