"""
CP decomposition by alternating least squares
=============================================

Decompose a noisy low-rank tensor, watch the error fall, then balance the
column norms across factors.
"""

import numpy as np

from qcpd import AlsConfig, balance_factors, cp_als, reconstruct, rel_error
from qcpd.bench import synthetic_tensor

syn = synthetic_tensor((20, 15, 9), rank=4, noise=0.01, seed=0)
t = syn.tensor

factors, errors = cp_als(t, AlsConfig(rank=4, max_iters=100, tol=1e-10, seed=0), return_errors=True)
print("sweeps:", len(errors) - 1)
print("error per sweep:", np.round(errors[:8], 4), "...", round(errors[-1], 5))
# with 1% noise the best possible relative error is about 0.01

# ALS is local: some starts stall in a long flat stretch ("swamp")
for seed in range(4):
    _, e = cp_als(t, AlsConfig(rank=4, max_iters=100, tol=1e-10, seed=seed), return_errors=True)
    print(f"init seed {seed}: {len(e) - 1:3d} sweeps, final error {e[-1]:.4f}")

# CP is invariant to scaling a column of one factor up and another down.
# Balancing picks the scaling where every factor's column norms agree.
print("column norms before:", [np.linalg.norm(f, axis=0).round(2) for f in factors])
bal = balance_factors(factors)
print("column norms after: ", [np.linalg.norm(f, axis=0).round(2) for f in bal])
print("reconstruction change:", rel_error(reconstruct(factors), reconstruct(bal)))
