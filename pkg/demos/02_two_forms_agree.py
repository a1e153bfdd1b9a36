"""The bridge-variable form and the compact form follow one trajectory.

Algorithm 1 stores x_i, y_ij and w_ij; Algorithm 2 keeps one z_ij per
neighbor and exchanges a single vector per edge. Starting both from a matched
state (z = w + rho y) their primal iterates coincide to round-off. With
alpha = 1/2 Algorithm 1 is exactly classical ADMM.
"""

import numpy as np

from radmm.consensus import (admm_step, alg1_state_from_z, alg1_step, alg2_state_from_alg1,
                             alg2_step)
from radmm.costs import centralized_optimum, make_random_quadratics
from radmm.graph import random_geometric

g = random_geometric(10, 0.5, seed=1)
costs = make_random_quadratics(10, seed=1)
x_star = centralized_optimum(costs)
print(g, "degrees", g.degrees.tolist())

alpha, rho = 0.8, 1.0
z0 = np.random.default_rng(0).standard_normal((g.n_slots, 1))
s1 = alg1_state_from_z(g, costs, z0, rho)
s2 = alg2_state_from_alg1(s1, rho)
for k in range(60):
    s2, _ = alg2_step(s2, g, costs, alpha, rho)
    if k % 10 == 0:
        gap = np.max(np.abs(s1.x - s2.x))
        err = np.linalg.norm(s2.x - x_star) / (np.sqrt(g.n_nodes) * np.linalg.norm(x_star))
        print(f"k={k:3d}  |x_alg1 - x_alg2|={gap:.1e}  rel. error={err:.2e}")
    s1 = alg1_step(s1, g, costs, alpha, rho)

# alpha = 1/2 drops the extra relaxation terms: compare with plain ADMM.
st = alg1_state_from_z(g, costs, z0, rho)
ref = admm_step(st, g, costs, rho)
nxt = alg1_step(st, g, costs, 0.5, rho)
print("alpha = 1/2 vs ADMM, max difference:", max(np.max(np.abs(ref.x - nxt.x)),
                                                   np.max(np.abs(ref.w - nxt.w))))
