"""Symmetric states and how close their marginals are to i.i.d. mixtures."""

# %%
import numpy as np

from dlab.purenet import default_net
from dlab.symsub import (
    definetti_fit,
    definetti_fit_general,
    embed_product,
    random_symmetric_state,
    reduce_symmetric,
    sym_dimension,
    sym_isometry,
)

for d, n in ((2, 8), (3, 6), (4, 4)):
    print(f"dim Sym^{n}(C^{d}) = {sym_dimension(d, n)}  (full space {d**n})")

# %%
# Columns of the isometry are normalised symmetrisations of computational strings.
u = sym_isometry(2, 2).matrix
print(np.round(u.real, 4))

# %%
# Reducing a product phi^{(x)n} returns phi exactly.
phi = np.array([0.6, 0.8j])
x = embed_product(phi, 8)
red = reduce_symmetric(np.outer(x, x.conj()), 2, 8, 1)
print("product reduction error:", np.abs(red - np.outer(phi, phi.conj())).max())

# %%
# For random symmetric states the k-body marginal is within k d / n of a
# mixture of i.i.d. states.  The fit uses a 0.1-net, so it is an upper bound.
net = default_net(2)
for n, k in ((8, 1), (6, 2), (10, 2), (10, 3)):
    worst = 0.0
    for s in range(10):
        small = random_symmetric_state(2, n, rank=1, seed=s)
        worst = max(worst, definetti_fit(reduce_symmetric(small, 2, n, k), net, k).distance)
    print(f"n = {n:2d}, k = {k}: worst fit {worst:.4f}  vs  k d / n = {k * 2 / n:.4f}")

# %%
# With an auxiliary system the fit also chooses a state on the auxiliary part.
small = random_symmetric_state(2, 8, aux_dim=2, rank=2, seed=3)
fit = definetti_fit_general(reduce_symmetric(small, 2, 8, 1, 2), net, 1, 2)
print(f"with a qubit auxiliary system: {fit.distance:.4f} vs {2 / 8}")
