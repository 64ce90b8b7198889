"""Epsilon-nets of pure states under the trace distance.

Nets are finite sets of unit vectors in C^d.  :func:`build_net_greedy` builds
one by farthest-point insertion over a Haar-random candidate pool,
:func:`certify_covering` estimates the covering radius by Monte-Carlo, and
:func:`convex_cover_distance` measures how well the convex hull of a net
approximates a given pure state.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._simplex import fit_simplex
from .qcore import (
    DimensionError,
    PureState,
    derive_seed,
    haar_vector,
    make_rng,
    parallel_map,
    proj,
)

DEFAULT_POOL = {2: 100_000, 3: 10_000}
CERTIFY_CHUNK = 4096


@dataclass(frozen=True)
class NetBounds:
    """Two-sided bounds on log2 of the minimum net size."""

    d: int
    epsilon: float
    log2_lower: float
    log2_upper: float

    @property
    def min_size(self) -> int:
        """Smallest integer size allowed by the lower bound."""
        return math.ceil(2.0 ** self.log2_lower - 1e-9)


def lemma1_bounds(d: int, epsilon: float) -> NetBounds:
    """2(d-1) log2(1/eps) <= log2 |I| <= 2(d-1) log2(1/eps) + log2(5 d ln d)."""
    if int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    lower = 2 * (d - 1) * math.log2(1.0 / epsilon)
    upper = lower + math.log2(5 * d * math.log(d))
    return NetBounds(int(d), float(epsilon), lower, upper)


def pure_distances(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Trace distances sqrt(1 - |<p|t>|^2) between every target (rows) and every point (cols)."""
    ov = np.abs(targets.conj() @ points.T) ** 2
    return np.sqrt(np.clip(1.0 - ov, 0.0, None))


@dataclass
class PureNet:
    """A finite set of pure states with a nominal and (optionally) a certified covering radius.

    ``certified_radius``/``samples``/``seed`` are filled in by :func:`certify_covering`.
    """

    points: np.ndarray
    nominal_radius: float
    certified_radius: float | None = None
    samples: int | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("a net needs at least one point")
        norms = np.linalg.norm(pts, axis=1)
        if np.abs(norms - 1).max() > 1e-12:
            raise ValueError("net points must be unit vectors")
        if not 0 < self.nominal_radius <= 1:
            raise ValueError("nominal radius must lie in (0, 1]")
        if pts.shape[0] > 1:
            dist = pure_distances(pts, pts)
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= 1e-9:
                raise ValueError("net points must be distinct up to global phase")
        self.points = pts

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def states(self) -> list[PureState]:
        return [PureState(p) for p in self.points]

    def projectors(self) -> np.ndarray:
        return np.einsum("ia,ib->iab", self.points, self.points.conj())

    def to_json(self) -> dict:
        from .qcore import matrix_to_json

        return {
            "d": self.dim,
            "nominal_radius": self.nominal_radius,
            "certified_radius": self.certified_radius,
            "samples": self.samples,
            "seed": self.seed,
            "points": [matrix_to_json(p) for p in self.points],
        }

    @classmethod
    def from_json(cls, obj) -> "PureNet":
        from .qcore import matrix_from_json

        if isinstance(obj, str):
            obj = json.loads(obj)
        pts = np.stack([matrix_from_json(p)[0].reshape(-1) for p in obj["points"]])
        return cls(
            pts,
            obj["nominal_radius"],
            obj.get("certified_radius"),
            obj.get("samples"),
            obj.get("seed"),
        )


def octahedron_net() -> PureNet:
    """The six Pauli eigenstates |0>,|1>,|+>,|->,|+i>,|-i> (covering radius ~0.4597)."""
    s = 1 / math.sqrt(2)
    pts = np.array([[1, 0], [0, 1], [s, s], [s, -s], [s, 1j * s], [s, -1j * s]], dtype=np.complex128)
    return PureNet(pts, 0.46)


def octahedron_radius() -> float:
    """Exact covering radius of the octahedron net: sin of half the vertex/face-centre Bloch angle."""
    return math.sin(math.acos(1 / math.sqrt(3)) / 2)


def build_net_greedy(d: int, epsilon: float, candidate_pool_size: int | None = None, seed=0) -> PureNet:
    """Greedy farthest-point net covering a Haar-random candidate pool to within ``epsilon``.

    Starts from the first candidate and repeatedly adds the candidate farthest
    from the current net (first index on ties) until every candidate is within
    ``epsilon``.  Coverage of the whole state space is only as good as the
    pool; use :func:`certify_covering` for an independent estimate.
    """
    if d < 2:
        raise DimensionError("nets are built for d >= 2")
    if not 0 < epsilon < 1:
        raise ValueError(f"net infeasible: epsilon must lie in (0, 1), got {epsilon}")
    pool_size = candidate_pool_size or DEFAULT_POOL.get(d, 10_000)
    pool = haar_vector(make_rng(seed), d, pool_size)
    chosen = [0]
    mind = pure_distances(pool[:1], pool)[:, 0]
    while True:
        far = int(np.argmax(mind))
        if mind[far] <= epsilon:
            break
        if len(chosen) >= pool_size:
            raise RuntimeError("net infeasible: candidate pool exhausted")
        chosen.append(far)
        mind = np.minimum(mind, pure_distances(pool[far : far + 1], pool)[:, 0])
    net = PureNet(pool[chosen], float(epsilon))
    net.meta = {"pool": pool_size, "pool_seed": seed, "pool_radius": float(mind.max())}
    return net


@functools.lru_cache(maxsize=16)
def default_net(d: int, epsilon: float = 0.1, seed: int = 0) -> PureNet:
    """Cached greedy net used as the default discretisation for de Finetti fits."""
    return build_net_greedy(d, epsilon, DEFAULT_POOL.get(d, 10_000), seed)


def certify_covering(net: PureNet, n_samples: int = 100_000, seed=0, workers: int | None = None) -> float:
    """Monte-Carlo covering radius: max over Haar targets of the distance to the nearest net point.

    Samples are drawn in fixed-size chunks whose seeds derive from ``seed`` and
    the chunk index, so the value does not depend on the worker count.  The
    result (and sample count) is stored on ``net``.
    """
    n_chunks = -(-n_samples // CERTIFY_CHUNK)

    def chunk_max(c):
        size = min(CERTIFY_CHUNK, n_samples - c * CERTIFY_CHUNK)
        targets = haar_vector(make_rng(derive_seed(seed, c)), net.dim, size)
        return float(pure_distances(net.points, targets).min(axis=1).max())

    radius = max(parallel_map(chunk_max, list(range(n_chunks)), workers))
    net.certified_radius = radius
    net.samples = int(n_samples)
    net.seed = int(seed) if isinstance(seed, (int, np.integer)) else None
    return radius


@dataclass(frozen=True)
class CoverFit:
    distance: float
    weights: np.ndarray
    converged: bool


def convex_cover_distance(net: PureNet, target, iters: int = 500) -> CoverFit:
    """Trace distance from ``target`` to the best mixture of net points (upper bound on the minimum)."""
    vec = np.asarray(getattr(target, "amplitudes", target), dtype=np.complex128)
    if vec.shape != (net.dim,):
        raise DimensionError(f"target dim {vec.shape} does not match net dim {net.dim}")
    fit = fit_simplex(net.projectors(), proj(vec), iters=iters)
    return CoverFit(fit.distance, fit.weights, fit.converged)
