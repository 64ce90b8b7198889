"""Trace distance, fidelity and epsilon-nets of qubit pure states."""

# %%
# Two random qubit states and the inequalities between their distance measures.
import math

import numpy as np

from dlab.metrics import fidelity, metric_report, trace_distance
from dlab.purenet import (
    build_net_greedy,
    certify_covering,
    convex_cover_distance,
    lemma1_bounds,
    octahedron_net,
    octahedron_radius,
)
from dlab.qcore import haar_vector, make_rng, random_density

rho = random_density(2, seed=1).matrix
sigma = random_density(2, seed=2).matrix
rep = metric_report(rho, sigma)
print(f"T = {rep.trace_distance:.6f}, F = {rep.fidelity:.6f}")
print(f"1 - sqrt(F) = {rep.fg_lower:.6f} <= T <= sqrt(1 - F) = {rep.fg_upper:.6f}")

# %%
# For pure states the upper inequality is tight.
rng = make_rng(0)
phi, psi = haar_vector(rng, 2), haar_vector(rng, 2)
P, Q = np.outer(phi, phi.conj()), np.outer(psi, psi.conj())
print(f"pure pair: T = {trace_distance(P, Q):.12f}, sqrt(1 - F) = {math.sqrt(1 - fidelity(P, Q)):.12f}")

# %%
# The six Pauli eigenstates form a net whose covering radius is reached at the
# centres of the octahedron's faces.
net = octahedron_net()
r = certify_covering(net, 100_000, seed=42)
print(f"octahedron: certified radius {r:.5f} (exact {octahedron_radius():.5f}) from {net.samples} samples")

# %%
# Any net at radius eps has at least 2^{2(d-1) log2(1/eps)} points.  Greedy
# nets sit between the two size bounds.
for eps in (0.46, 0.25, 0.1):
    b = lemma1_bounds(2, eps)
    g = build_net_greedy(2, eps, seed=0)
    print(f"eps = {eps:4}: greedy size {len(g):4d}, bounds [{2**b.log2_lower:7.1f}, {2**b.log2_upper:8.1f}]")

# %%
# Mixtures of net points do much better than the nearest point: the convex hull
# of an r-net approximates every pure state to within r^2.
targets = haar_vector(make_rng(7), 2, 200)
nearest = max(min(math.sqrt(1 - abs(np.vdot(p, t)) ** 2) for p in net.points) for t in targets)
hull = max(convex_cover_distance(net, t).distance for t in targets)
print(f"worst nearest-point distance {nearest:.4f}, worst hull distance {hull:.4f}, r^2 = {r**2:.4f}")
