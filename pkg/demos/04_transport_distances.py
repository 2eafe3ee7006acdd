"""Exact transport distances between weighted point clouds and the metric
on function/measure pairs.

The network-simplex solver returns optimal plans with their spatial
(stagnation) cost; conditional averaging under a plan recovers a limit
function on a coarser support.
"""

import numpy as np

from gfstack import (
    TLpPoint,
    barycentric_map,
    tlp_distance,
    uniform_measure,
    wasserstein,
)

mu = uniform_measure([[0.0], [1.0]])
nu = uniform_measure([[0.25], [0.75]])
d, plan = wasserstein(mu, nu, 2.0)
print(f"2-Wasserstein between {{0, 1}} and {{0.25, 0.75}}: {d:.4f}")
print("optimal plan:\n", plan.pi)

a = TLpPoint(mu, np.array([0.0, 1.0]))
b = TLpPoint(mu, np.array([1.0, 0.0]))
d1, plan1 = tlp_distance(a, b, 1.0)
print(f"\npair distance with swapped values at p = 1: {d1:.4f}")
print(f"spatial (stagnation) part of the optimal plan: {plan1.stagnation_cost:.4f}")

print("\nconditional averaging under a plan recovers a fine profile coarsely:")
fine = uniform_measure(((np.arange(32) + 0.5) / 32)[:, None])
vals = np.cos(np.pi * fine.atoms[:, 0])
for n in (4, 8, 16):
    coarse = uniform_measure(((np.arange(n) + 0.5) / n)[:, None])
    _, pl = wasserstein(coarse, fine, 2.0)
    u = barycentric_map(pl, vals)
    dist, _ = tlp_distance(TLpPoint(coarse, u), TLpPoint(fine, vals), 2.0)
    print(f"  n={n:2d}: recovery distance {dist:.4f}, stagnation {pl.stagnation_cost:.5f}")
