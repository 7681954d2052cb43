"""How fast do the level differences shrink?

The multilevel estimator is worthwhile because the second-moment norm of
the coupled difference decays like a power of the stopping width. Theory
guarantees an exponent of at least 1/3 for Lipschitz boundary data; the
measured exponent on the square sits near 0.5.
"""

from mlwos import get_problem, variance_study

res = variance_study(
    get_problem("square"), eta=2.0, eps0=0.5, num_levels=6,
    m_per_level=10_000, seed=7, reps=3,
)

print("level   eps        ||Y_l - Y_(l-1)||")
for eps, norm in zip(res.level_eps, res.level_norms):
    print(f"  {res.level_eps.index(eps) + 1}    {eps:8.5f}     {norm:.5f}")
print(f"\nfitted decay exponent: {res.fit.slope:.3f} (r2 {res.fit.r_squared:.3f})")
print("theory floor for Lipschitz data: 1/3")
