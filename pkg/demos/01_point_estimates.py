"""Estimate the solution of the Laplace Dirichlet problem at a point.

The hemisphere problem has a closed-form solution, so we can watch both the
plain walk-on-spheres estimator and the measured-allocation multilevel
estimator land inside their reported error bars.
"""

from mlwos import adaptive_mlmc, get_problem, mc_estimate

problem = get_problem("hemisphere")
truth = problem.reference_solution
start = tuple(round(float(c), 3) for c in problem.start)
print(f"u({start}) = {truth:.6f} (analytic)")

for eps in (5e-3, 1e-3):
    plain = mc_estimate(problem, eps, seed=1)
    multi = adaptive_mlmc(problem, eps, eta=16.0, seed=1)
    print(f"\ntarget eps = {eps:g}")
    print(
        f"  plain WoS : {plain.value:.6f}  err {plain.value - truth:+.2e}  "
        f"stat {plain.stat_error:.1e}  work {plain.total_steps:>9d} steps"
    )
    print(
        f"  multilevel: {multi.value:.6f}  err {multi.value - truth:+.2e}  "
        f"stat {multi.stat_error:.1e}  work {multi.total_steps:>9d} steps"
    )
    print(f"  multilevel widths {[f'{e:.4g}' for e in multi.eps]} samples {list(multi.m)}")
