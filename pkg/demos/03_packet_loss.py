"""Convergence under random packet loss.

Each directed message is dropped independently with probability p; the
receiver then keeps its old z. Averaged over Monte-Carlo runs, losses slow
convergence down but do not break it.
"""

from radmm.experiments import ExperimentConfig, monte_carlo

base = ExperimentConfig(alpha=1.0, rho=1.0, n_runs=50, seed=7)
for p in (0.0, 0.2, 0.4, 0.6):
    res = monte_carlo(base.replace(p=p))
    mean, mean_log, n_div = res.aggregate()
    print(f"p={p:.1f}  outcome={res.outcome():<10} mean iters to 1e-4="
          f"{res.mean_iters_to_target():6.1f}  mean log10 error at k=50: {mean_log[50]: .2f}")
