"""Trace distance, fidelity, purification and the inequalities relating them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcore import DensityOp, DimensionError, PureState, _matrix, apply_channel


def _pair(rho, sigma):
    a, b = _matrix(rho), _matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"state shapes differ: {a.shape} vs {b.shape}")
    return a, b


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``."""
    a, b = _pair(rho, sigma)
    diff = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def _factor(a: np.ndarray) -> np.ndarray:
    """A with a = A A^dag, dropping eigenvalues at roundoff level."""
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    keep = w > 1e-14 * max(w[-1], 1e-300)
    return v[:, keep] * np.sqrt(w[keep])


def fidelity(rho, sigma) -> float:
    """Squared Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Evaluated as ||A^dag B||_1^2 with rho = A A^dag and sigma = B B^dag, so
    rank-deficient states keep full relative accuracy.
    """
    a, b = _pair(rho, sigma)
    s = np.linalg.svd(_factor(a).conj().T @ _factor(b), compute_uv=False)
    return float(s.sum() ** 2)


def pure_fidelity(phi, psi) -> float:
    """|<phi|psi>|^2 for state vectors."""
    a = np.asarray(getattr(phi, "amplitudes", phi))
    b = np.asarray(getattr(psi, "amplitudes", psi))
    return float(abs(np.vdot(a, b)) ** 2)


def purify(rho) -> PureState:
    """Purification on C^d (x) C^d from the eigendecomposition of ``rho``.

    The system comes first, the purifying copy second, so tracing factor 1 gives back ``rho``.
    """
    m = _matrix(rho)
    d = m.shape[0]
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 0, None)
    # |Phi> = sum_i sqrt(w_i) |v_i> (x) |i>
    psi = (v * np.sqrt(w)).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    dims = getattr(rho, "factor_dims", (d,)) + (d,)
    return PureState(psi, dims)


@dataclass(frozen=True)
class MetricReport:
    trace_distance: float
    fidelity: float
    fg_lower: float
    fg_upper: float

    @property
    def sandwich_slack(self) -> float:
        """Smallest margin in 1 - sqrt(F) <= T <= sqrt(1 - F); negative means violated."""
        return min(self.trace_distance - self.fg_lower, self.fg_upper - self.trace_distance)


def metric_report(rho, sigma) -> MetricReport:
    t = trace_distance(rho, sigma)
    f = fidelity(rho, sigma)
    fc = min(max(f, 0.0), 1.0)
    return MetricReport(t, f, 1.0 - np.sqrt(fc), float(np.sqrt(1.0 - fc)))


def check_monotonicity(rho, sigma, ch) -> tuple[float, float]:
    """Return (T(rho,sigma) - T(ch rho, ch sigma), F(ch rho, ch sigma) - F(rho,sigma)).

    Both slacks are non-negative for any channel, up to roundoff.
    """
    _pair(rho, sigma)
    a, b = _matrix(rho), _matrix(sigma)
    ca, cb = apply_channel(ch, a), apply_channel(ch, b)
    slack_t = trace_distance(a, b) - trace_distance(ca, cb)
    slack_f = fidelity(ca, cb) - fidelity(a, b)
    return slack_t, slack_f


__all__ = [
    "DensityOp",
    "MetricReport",
    "check_monotonicity",
    "fidelity",
    "metric_report",
    "pure_fidelity",
    "purify",
    "trace_distance",
]
