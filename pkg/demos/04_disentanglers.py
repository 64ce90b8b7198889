"""The two disentangler constructions, checked against their claims."""

# %%
from dlab import disentangler as dis
from dlab.purenet import certify_covering, octahedron_net

net = octahedron_net()
certify_covering(net, 100_000, seed=42)
net_spec = dis.build_net_disentangler(net)
df_spec = dis.build_definetti_disentangler(2, 8)
for spec in (net_spec, df_spec):
    print(spec.summary())

# %%
# Condition 1: outputs are close to separable.  Condition 2: every separable
# state is close to some output.  The net construction is exact on the first,
# the de Finetti construction on the second.
for spec in (net_spec, df_spec):
    c1 = dis.verify_condition1(spec, trials=20, seed=1, restarts=3)
    c2 = dis.verify_condition2(spec, targets=50, seed=1)
    print(f"{spec.kind:16s} c1 worst {c1.worst_observed:.2e} (claim {c1.claim:.4f})"
          f"   c2 worst {c2.worst_observed:.2e} (claim {c2.claim:.4f})")

# %%
# The strong version adds a reference system.  For the net construction the
# first output is produced by measure-and-prepare, so tracing out the second
# output gives an entanglement-breaking channel: that covers every reference.
eb = dis.eb_reduction_check(net_spec)
print("net construction, reduced channel:", eb.notes)
sc = dis.verify_strong_condition1(df_spec, dim_r=2, trials=6, seed=2, restarts=3)
print(f"de Finetti, qubit reference: worst {sc.worst_observed:.4f} vs {sc.claim}")

# %%
# A negative control: the identity channel claims to be a perfect disentangler.
bad = dis.verify_condition1(dis.identity_spec(2), trials=3, seed=0, restarts=3)
print(f"identity control: worst {bad.worst_observed:.4f}, passed = {bad.passed}")

# %%
# Size formulas.  The lower bound only bites for large d.
for d, eps, delta in ((21, 0.0, 0.04), (2, 0.25, 0.0), (100, 0.05, 0.01)):
    tb = dis.theorem_lower_bound(d, eps, delta)
    print(f"d = {d:3d}, eps = {eps}, delta = {delta}: Delta = {tb.delta_quantity:.4f}, "
          f"log2 D >= {tb.log2_D_lower:.3f}")
sb = dis.construction_size_bounds("definetti", 2, 8)
print(f"de Finetti d=2 n=8: log2 D = {sb.log2_D_actual:.3f} <= {sb.log2_D_paper_upper:.3f}")
