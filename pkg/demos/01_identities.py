"""
Factorized layer versus brute force
===================================

The trilinear layer never builds its interaction tensors.  At toy sizes we
can build them, and the two routes should agree to rounding error.
"""

import numpy as np

from trifuse import CtiLayerParams, attention_map, joint_representation
from trifuse.oracle import assemble_full_tensor, expanded_interaction, full_interaction
from trifuse.paralind import reconstruct_attention_tensor, reconstruct_joint_tensor
from trifuse.tensor import mode_product

rng = np.random.default_rng(0)
n, d, d_z, R = (3, 2, 4), (4, 6, 2), 5, 2
params = CtiLayerParams.random(d, d_z, R, rng)
v, q, a = (rng.normal(size=(nn, dd)) for nn, dd in zip(n, d))

# %%
# Attention map
# -------------
# The factorized map sums R small Tucker slices over projected channels.  The
# oracle reconstructs the d_v x d_q x d_a tensor and contracts each mode.

att = attention_map(params, v, q, a)
t = reconstruct_attention_tensor(params.attention).data
oracle = mode_product(mode_product(mode_product(t, v, 0), q, 1), a, 2).data
print("attention map  max |diff|:", np.abs(att - oracle).max())

# %%
# Joint vector
# ------------
# With a superdiagonal core the per-triplet tensor collapses into a Hadamard
# product of three projections.  Summing triplets one at a time through the
# rebuilt tensor gives the same vector.

z = joint_representation(params, att, v, q, a)
t_sc = reconstruct_joint_tensor(params.joint).data
z_loop = expanded_interaction(t_sc, att, v, q, a)
print("joint vector   max |diff|:", np.abs(z - z_loop).max())

# %%
# And the per-triplet sum is itself one big interaction over the vectorized
# inputs, with a tensor of (n_v d_v)(n_q d_q)(n_a d_a) d_z entries.

big = assemble_full_tensor(t_sc, att)
print("full tensor shape:", big.shape, "entries:", big.size)
print("full vs triplets max |diff|:", np.abs(full_interaction(big, v, q, a) - z_loop).max())

# %%
# The same checks, on many random configurations, are what ``trifuse verify``
# runs.

from trifuse.verify import run_all

print(run_all(n_cases=50).format())
