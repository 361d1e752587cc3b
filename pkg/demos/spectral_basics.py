"""Rank-one recovery from binary responses.

Two hundred items, two thousand workers. We sample a 0/1 matrix whose mean is
u v^T, then recover u from the split estimator and watch the worst-case
error shrink as more workers are used.
"""
import numpy as np

from adaptive_spectral import RankOneInstance, estimate_split, expected_matrix, sample_observations

rng = np.random.default_rng(0)
u = np.sort(rng.uniform(0.5, 1.0, 200))[::-1]
v = rng.uniform(0.5, 1.0, 2000)
inst = RankOneInstance.raw(u, v, c_lower=0.5)

# with the exact mean matrix the estimate is exact
noiseless = estimate_split(expected_matrix(inst), float(np.linalg.norm(v)))
print("noiseless max error:", np.abs(noiseless.u_hat - u).max())

print("\n   m   max |u_hat - u|   (should fall roughly like 1/sqrt(m))")
for m in (125, 500, 2000):
    cols = np.arange(m)
    X = sample_observations(inst, range(200), m, seed=m, col_ids=cols).entries
    est = estimate_split(X, float(np.linalg.norm(v[cols])))
    print(f"{m:5d}   {np.abs(est.u_hat - u).max():.4f}")

print("\nfirst five items")
print("true u :", np.round(u[:5], 3))
print("u_hat  :", np.round(est.u_hat[:5], 3))
