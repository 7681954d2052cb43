"""How often does the fine half of a pair escape far from the coarse half?

The coupling argument needs the probability of a large coarse-to-fine exit
gap to vanish linearly in the stopping width. Measuring it is a direct
empirical check: the log-log slope of p_hat against eps should be near 1.
"""

from mlwos import get_problem, pdiv_study

res = pdiv_study(
    get_problem("square"), [0.05, 0.025, 0.0125, 0.00625],
    radius=0.2, m=20_000, seed=3,
)

print("eps        divergences   p_hat")
for row in res.rows:
    print(f"{row['eps']:8.5f}   {row['divergences']:8d}     {row['p_hat']:.5f}")
print(f"\nfitted slope of p_hat vs eps: {res.fit.slope:.3f} (expect about 1)")
