"""Relaxed Peaceman-Rachford on a two-function problem.

Minimise f(x) + g(x) with f(x) = (x - 1)^2 and g(x) = (x + 1)^2. The sum is
minimised at x = 0. We watch the iterate for a few relaxation values and see
that alpha = 1/2 (Douglas-Rachford) and alpha < 1 converge, while alpha = 1
is accepted but flagged as outside the guaranteed region.
"""

import numpy as np

from radmm.splitting import SplittingParams, prox, quadratic_function, reflect, rprs_solve

# f(x) = x^2 Q / 2 + b x with Q = 2 and b = -2 is (x - 1)^2 up to a constant.
f = quadratic_function(2.0, -2.0)
g = quadratic_function(2.0, 2.0)

# The proximal map of x^2 at v = 3 with penalty 1 lands at 1; its reflection at -1.
print("prox of x^2 at 3:", prox(quadratic_function(2.0), 1.0, [3.0]))
print("reflect of x^2 at 3:", reflect(quadratic_function(2.0), 1.0, [3.0]))

for alpha in (0.25, 0.5, 0.9, 1.0):
    res = rprs_solve(f, g, SplittingParams(alpha=alpha, rho=1.0, tol=1e-12), np.array([5.0]))
    print(f"alpha={alpha:<5} status={res.status:<12} iterations={res.iterations:<4} "
          f"x*={res.x[0]: .2e} guaranteed={res.metadata['guaranteed_region']}")
