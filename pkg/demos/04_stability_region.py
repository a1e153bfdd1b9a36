"""Where does the iteration stop converging?

For alpha > 1 the relaxation is no longer averaged and runs can blow up. We
sweep alpha at rho = 1 for several loss levels and report the largest alpha
whose runs all converge. Lossy links damp the iteration, so the region grows
with p.
"""

from radmm.experiments import ExperimentConfig, stability_sweep

base = ExperimentConfig(n_runs=30, seed=3)
alphas = tuple(round(0.1 * i, 1) for i in range(5, 21))
sw = stability_sweep(base, alphas=alphas, rhos=(1.0,), ps=(0.0, 0.3, 0.6))
mark = {"converged": "+", "diverged": "x", "inconclusive": "?"}
for p in sw.ps:
    row = "".join(mark[sw.cell(a, 1.0, p).outcome] for a in alphas)
    print(f"p={p:.1f}  alpha 0.5..2.0: {row}   alpha_max={sw.alpha_max(p, 1.0)}")
