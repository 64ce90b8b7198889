"""Finite-dimensional operator algebra: states, channels, partial traces and Choi matrices.

Everything here works on dense complex numpy arrays.  The typed wrappers
(:class:`PureState`, :class:`DensityOp`, :class:`LinOp`, :class:`ChoiOp`,
:class:`KrausChannel`) validate their invariants on construction and carry the
tensor-factor structure explicitly, so partial traces never have to guess it.
The module-level helpers that start with ``ptrace``/``kron`` accept plain
arrays and are what the optimisation code uses in its inner loops.
"""

from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

HERM_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-12
KRAUS_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when operator dimensions or tensor structures do not match."""


class InvariantError(ValueError):
    """Raised when a value violates the invariants of its type."""


def _dims(factor_dims, total: int) -> tuple[int, ...]:
    if factor_dims is None:
        return (total,)
    dims = tuple(int(x) for x in factor_dims)
    if any(x < 1 for x in dims):
        raise DimensionError(f"factor dimensions must be positive, got {dims}")
    if math.prod(dims) != total:
        raise DimensionError(f"factor dims {dims} do not multiply to {total}")
    return dims


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PureState:
    """Unit vector in C^d with an optional tensor-factor structure."""

    amplitudes: np.ndarray
    factor_dims: tuple[int, ...] = None

    def __post_init__(self):
        amp = np.asarray(self.amplitudes)
        if amp.ndim != 1 or amp.size < 1:
            raise InvariantError("amplitudes must be a non-empty vector")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantError(f"state norm is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", _frozen(amp))
        object.__setattr__(self, "factor_dims", _dims(self.factor_dims, amp.size))

    @classmethod
    def from_vector(cls, vec, factor_dims=None) -> "PureState":
        """Normalise ``vec`` and wrap it."""
        vec = np.asarray(vec, dtype=np.complex128)
        return cls(vec / np.linalg.norm(vec), factor_dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityOp":
        return DensityOp(self.projector(), self.factor_dims)


@dataclass(frozen=True)
class DensityOp:
    """Positive semidefinite, unit-trace matrix with explicit tensor structure."""

    matrix: np.ndarray
    factor_dims: tuple[int, ...] = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantError(f"density matrix must be square, got shape {m.shape}")
        herm = np.abs(m - m.conj().T).max()
        if herm > HERM_TOL:
            raise InvariantError(f"matrix is not Hermitian (deviation {herm:.3g})")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantError(f"trace is {tr!r}, expected 1")
        lmin = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
        if lmin < -PSD_TOL:
            raise InvariantError(f"matrix has negative eigenvalue {lmin:.3g}")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "factor_dims", _dims(self.factor_dims, m.shape[0]))

    @classmethod
    def from_matrix(cls, m, factor_dims=None) -> "DensityOp":
        """Hermitise and renormalise ``m`` before validation (for numerically noisy inputs)."""
        m = np.asarray(m, dtype=np.complex128)
        m = (m + m.conj().T) / 2
        return cls(m / np.trace(m).real, factor_dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LinOp:
    """Linear map from C^{in_dim} to C^{out_dim} (``matrix`` has shape (out_dim, in_dim))."""

    matrix: np.ndarray
    in_dims: tuple[int, ...] = None
    out_dims: tuple[int, ...] = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2:
            raise InvariantError("LinOp matrix must be 2-D")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "out_dims", _dims(self.out_dims, m.shape[0]))
        object.__setattr__(self, "in_dims", _dims(self.in_dims, m.shape[1]))

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ChoiOp:
    """Choi matrix J = sum_ij |i><j| (x) Gamma(|i><j|), input factor first."""

    matrix: np.ndarray
    in_dim: int
    out_dim: int

    def __post_init__(self):
        m = np.asarray(self.matrix)
        n = self.in_dim * self.out_dim
        if m.shape != (n, n):
            raise DimensionError(f"Choi matrix shape {m.shape} does not match {self.in_dim}x{self.out_dim}")
        herm = np.abs(m - m.conj().T).max()
        if herm > HERM_TOL:
            raise InvariantError(f"Choi matrix is not Hermitian (deviation {herm:.3g})")
        lmin = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
        if lmin < -PSD_TOL:
            raise InvariantError(f"Choi matrix is not PSD (eigenvalue {lmin:.3g}); map is not CP")
        marg = ptrace(m, (self.in_dim, self.out_dim), [1])
        tp = np.abs(marg - np.eye(self.in_dim)).max()
        if tp > TRACE_TOL:
            raise InvariantError(f"output partial trace deviates from identity by {tp:.3g}; map is not TP")
        object.__setattr__(self, "matrix", _frozen(m))


@dataclass(frozen=True)
class KrausChannel:
    """CPTP map given by Kraus operators, stacked as an array of shape (r, out_dim, in_dim)."""

    kraus: np.ndarray
    in_dims: tuple[int, ...] = None
    out_dims: tuple[int, ...] = None

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=np.complex128)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3:
            raise InvariantError("Kraus operators must stack to shape (r, out, in)")
        closure = np.einsum("kai,kaj->ij", k.conj(), k)
        dev = np.abs(closure - np.eye(k.shape[2])).max()
        if dev > KRAUS_TOL:
            raise InvariantError(f"sum K^dag K deviates from identity by {dev:.3g}")
        object.__setattr__(self, "kraus", _frozen(k))
        object.__setattr__(self, "out_dims", _dims(self.out_dims, k.shape[1]))
        object.__setattr__(self, "in_dims", _dims(self.in_dims, k.shape[2]))

    @classmethod
    def from_linops(cls, ops: Sequence[LinOp]) -> "KrausChannel":
        ops = list(ops)
        if not ops:
            raise InvariantError("need at least one Kraus operator")
        if len({(op.in_dim, op.out_dim) for op in ops}) != 1:
            raise DimensionError("Kraus operators must share in/out dimensions")
        return cls(np.stack([op.matrix for op in ops]), ops[0].in_dims, ops[0].out_dims)

    @property
    def kraus_ops(self) -> list[LinOp]:
        return [LinOp(k, self.in_dims, self.out_dims) for k in self.kraus]

    @property
    def in_dim(self) -> int:
        return self.kraus.shape[2]

    @property
    def out_dim(self) -> int:
        return self.kraus.shape[1]

    def __call__(self, rho):
        return apply_channel(self, rho)


# ---------------------------------------------------------------------------
# array-level helpers


def ket(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=np.complex128)
    v[i] = 1.0
    return v


def proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, np.conj(v))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    mats = list(mats)
    out = np.ones((1,) * np.ndim(mats[0]), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


def ptrace(mat: np.ndarray, dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    """Partial trace of a square matrix over the factors listed in ``traced``."""
    dims = tuple(dims)
    traced = sorted(set(traced))
    n = len(dims)
    if any(t < 0 or t >= n for t in traced):
        raise DimensionError(f"traced factors {traced} out of range for {n} factors")
    keep = [i for i in range(n) if i not in traced]
    t = np.asarray(mat).reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out_idx = keep + [i + n for i in keep]
    dk = math.prod(dims[i] for i in keep)
    return np.einsum(t, row + col, out_idx).reshape(dk, dk)


def ptranspose(mat: np.ndarray, dims: Sequence[int], sys: Iterable[int]) -> np.ndarray:
    """Partial transpose over the factors in ``sys``."""
    dims = tuple(dims)
    n = len(dims)
    sys = set(sys)
    t = np.asarray(mat).reshape(dims + dims)
    perm = [i + n if i in sys else i for i in range(n)] + [i if i in sys else i + n for i in range(n)]
    return t.transpose(perm).reshape(mat.shape)


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix, clamping negative eigenvalues to 0."""
    w, v = np.linalg.eigh((mat + mat.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def polar_unitary(a: np.ndarray) -> np.ndarray:
    """Unitary (or partial isometry) factor of the polar decomposition of ``a``."""
    u, _, vh = np.linalg.svd(a, full_matrices=False)
    return u @ vh


def _matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "matrix", x))


# ---------------------------------------------------------------------------
# operations on typed values


def tensor(a, b):
    """Kronecker product of two values of the same kind, concatenating factor dims."""
    if type(a) is not type(b):
        raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    if isinstance(a, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), a.factor_dims + b.factor_dims)
    if isinstance(a, DensityOp):
        return DensityOp(np.kron(a.matrix, b.matrix), a.factor_dims + b.factor_dims)
    if isinstance(a, LinOp):
        return LinOp(np.kron(a.matrix, b.matrix), a.in_dims + b.in_dims, a.out_dims + b.out_dims)
    raise TypeError(f"tensor not defined for {type(a).__name__}")


def partial_trace(op, traced):
    """Trace out the factors whose indices are in ``traced`` (0-based).

    Tracing every factor returns the scalar trace.
    """
    traced = set(traced)
    if isinstance(op, DensityOp):
        dims = op.factor_dims
    elif isinstance(op, LinOp):
        if op.in_dims != op.out_dims:
            raise DimensionError("partial trace needs a square LinOp with matching factors")
        dims = op.in_dims
    else:
        raise TypeError(f"partial_trace not defined for {type(op).__name__}")
    if any(t not in range(len(dims)) for t in traced):
        raise DimensionError(f"invalid factor indices {sorted(traced)} for dims {dims}")
    keep = tuple(d for i, d in enumerate(dims) if i not in traced)
    red = ptrace(op.matrix, dims, traced)
    if not keep:
        return complex(red[0, 0]) if isinstance(op, LinOp) else float(red[0, 0].real)
    if isinstance(op, DensityOp):
        return DensityOp.from_matrix(red, keep)
    return LinOp(red, keep, keep)


def apply_kraus(kraus: np.ndarray, rho: np.ndarray) -> np.ndarray:
    out = np.einsum("kai,ij,kbj->ab", kraus, rho, kraus.conj())
    return (out + out.conj().T) / 2


def apply_choi(choi: np.ndarray, in_dim: int, out_dim: int, rho: np.ndarray) -> np.ndarray:
    j = choi.reshape(in_dim, out_dim, in_dim, out_dim)
    out = np.einsum("ij,iajb->ab", rho, j)
    return (out + out.conj().T) / 2


def apply_channel(ch, rho):
    """Apply a :class:`KrausChannel` or :class:`ChoiOp` to a density operator.

    Returns a :class:`DensityOp` when given one, otherwise a plain array.
    """
    m = _matrix(rho)
    if isinstance(ch, KrausChannel):
        if m.shape[0] != ch.in_dim:
            raise DimensionError(f"channel input dim {ch.in_dim} != state dim {m.shape[0]}")
        out = apply_kraus(ch.kraus, m)
        out_dims = ch.out_dims
    elif isinstance(ch, ChoiOp):
        if m.shape[0] != ch.in_dim:
            raise DimensionError(f"channel input dim {ch.in_dim} != state dim {m.shape[0]}")
        out = apply_choi(ch.matrix, ch.in_dim, ch.out_dim, m)
        out_dims = None
    else:
        raise TypeError(f"not a channel: {type(ch).__name__}")
    if isinstance(rho, DensityOp):
        return DensityOp.from_matrix(out, out_dims)
    return out


def choi_matrix(kraus: np.ndarray) -> np.ndarray:
    # vec(K) = sum_i |i> (x) K|i>, so J = sum_k vec(K_k) vec(K_k)^dag
    r, dout, din = kraus.shape
    vecs = kraus.transpose(0, 2, 1).reshape(r, din * dout)
    return vecs.T @ vecs.conj()


def choi_of(ch: KrausChannel) -> ChoiOp:
    """Choi operator of a Kraus channel (input factor first)."""
    return ChoiOp(choi_matrix(ch.kraus), ch.in_dim, ch.out_dim)


def channel_of(choi: ChoiOp, tol: float = 1e-13) -> KrausChannel:
    """Kraus representation recovered from the eigendecomposition of a Choi matrix."""
    if not isinstance(choi, ChoiOp):
        raise TypeError("channel_of expects a ChoiOp")
    w, v = np.linalg.eigh(choi.matrix)
    keep = w > tol * max(1.0, w[-1])
    vecs = v[:, keep] * np.sqrt(w[keep])
    kraus = vecs.T.reshape(-1, choi.in_dim, choi.out_dim).transpose(0, 2, 1)
    # Exact TP restoration: the Choi matrix passed the TP check, this only removes roundoff.
    closure = np.einsum("kai,kaj->ij", kraus.conj(), kraus)
    kraus = kraus @ np.linalg.inv(psd_sqrt(closure))
    return KrausChannel(kraus)


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d)[None])


def replacement_channel(in_dim: int, state) -> KrausChannel:
    """Trace-and-replace channel rho -> tr(rho) * state."""
    tau = _matrix(state)
    w, v = np.linalg.eigh(tau)
    ks = []
    for lam, vec in zip(w, v.T):
        if lam <= 1e-15:
            continue
        for i in range(in_dim):
            ks.append(np.sqrt(lam) * np.outer(vec, ket(in_dim, i)))
    return KrausChannel(np.stack(ks))


def depolarizing_channel(d: int) -> KrausChannel:
    """Fully depolarising channel rho -> I/d."""
    return replacement_channel(d, np.eye(d) / d)


# ---------------------------------------------------------------------------
# seeded sampling


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(master: int, *counter: int) -> np.random.SeedSequence:
    """Counter-based child seed: identical for a given (master, counter) regardless of scheduling."""
    return np.random.SeedSequence(int(master), spawn_key=tuple(int(c) for c in counter))


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)


def haar_vector(rng: np.random.Generator, d: int, size: int | None = None) -> np.ndarray:
    """Haar-random unit vector(s); with ``size`` returns an array of shape (size, d)."""
    shape = (d,) if size is None else (size, d)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def haar_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Haar-random isometry C^cols -> C^rows via QR with the phase fix diag(R) > 0."""
    if cols > rows:
        raise DimensionError(f"no isometry from C^{cols} into C^{rows}")
    q, r = np.linalg.qr(ginibre(rng, rows, cols))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    return haar_isometry(rng, d, d)


def random_pure(d: int, seed=None) -> PureState:
    if d < 1:
        raise DimensionError("dimension must be >= 1")
    return PureState(haar_vector(make_rng(seed), d))


def random_density(d: int, rank: int | None = None, seed=None, factor_dims=None) -> DensityOp:
    """Ginibre-induced random density matrix of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    if d < 1 or rank < 1:
        raise DimensionError("dimension and rank must be >= 1")
    if rank > d:
        raise DimensionError(f"rank {rank} exceeds dimension {d}")
    g = ginibre(make_rng(seed), d, rank)
    rho = g @ g.conj().T
    return DensityOp.from_matrix(rho, factor_dims)


def random_channel(in_dim: int, out_dim: int, env_dim: int | None = None, seed=None) -> KrausChannel:
    """Channel from a Haar isometry C^in -> C^out (x) C^env followed by tracing the environment."""
    env_dim = in_dim * out_dim if env_dim is None else env_dim
    if min(in_dim, out_dim, env_dim) < 1:
        raise DimensionError("dimensions must be >= 1")
    v = haar_isometry(make_rng(seed), out_dim * env_dim, in_dim)
    kraus = v.reshape(out_dim, env_dim, in_dim).transpose(1, 0, 2)
    return KrausChannel(kraus)


def parallel_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """Order-preserving map over a thread pool; worker count never affects results."""
    workers = workers if workers is not None else default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def default_workers() -> int:
    env = os.environ.get("DLAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# serialization

QMX_MAGIC = b"QMX1"


def matrix_to_json(x, factor_dims=None) -> dict:
    """JSON-ready dict {"shape", "factor_dims", "re", "im"} for a vector or matrix."""
    if factor_dims is None:
        factor_dims = getattr(x, "factor_dims", None)
    a = np.asarray(getattr(x, "matrix", getattr(x, "amplitudes", x)), dtype=np.complex128)
    shape = list(a.shape) if a.ndim == 2 else [a.shape[0], 1]
    if factor_dims is None:
        factor_dims = [shape[0]]
    flat = a.reshape(-1)
    return {
        "shape": shape,
        "factor_dims": [int(f) for f in factor_dims],
        "re": [float(v) for v in flat.real],
        "im": [float(v) for v in flat.imag],
    }


def matrix_from_json(obj) -> tuple[np.ndarray, tuple[int, ...]]:
    if isinstance(obj, str):
        obj = json.loads(obj)
    r, c = obj["shape"]
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.size != r * c or im.size != r * c:
        raise DimensionError("re/im length does not match shape")
    a = (re + 1j * im).reshape(r, c)
    return a, tuple(obj.get("factor_dims", [r]))


def to_qmx(x) -> bytes:
    """Binary QMX1 encoding: magic, u32 rank, u32 dims, interleaved little-endian f64 (re, im)."""
    a = np.asarray(getattr(x, "matrix", getattr(x, "amplitudes", x)), dtype=np.complex128)
    head = QMX_MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    body = np.ascontiguousarray(a).view(np.float64).astype("<f8").tobytes()
    return head + body


def from_qmx(data: bytes) -> np.ndarray:
    if data[:4] != QMX_MAGIC:
        raise ValueError("not a QMX1 payload")
    (rank,) = struct.unpack_from("<I", data, 4)
    shape = struct.unpack_from(f"<{rank}I", data, 8)
    off = 8 + 4 * rank
    n = math.prod(shape)
    flat = np.frombuffer(data, dtype="<f8", count=2 * n, offset=off)
    if flat.size != 2 * n:
        raise ValueError("truncated QMX1 payload")
    return flat.astype(np.float64).view(np.complex128).reshape(shape)


def load_matrix(path: str | os.PathLike) -> tuple[np.ndarray, tuple[int, ...] | None]:
    """Read a matrix/vector from a .json (qcore JSON) or QMX1 file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == QMX_MAGIC:
        return from_qmx(data), None
    return matrix_from_json(json.loads(data.decode()))
