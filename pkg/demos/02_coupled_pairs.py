"""Anatomy of a coupled coarse/fine pair.

One walk is recorded twice: when it first enters the coarse stopping shell
and again when it reaches the fine one. The coarse record is literally a
prefix of the fine path, which is what makes the level differences small,
and small differences are the entire multilevel advantage.
"""

import numpy as np

from mlwos import StreamKey, derive_stream, get_problem, ml_pair, run_many

problem = get_problem("square")
domain, bc = problem.domain, problem.bc

pair = ml_pair(domain, problem.start, 0.1, 0.1 / 16, stream=derive_stream(StreamKey(42)), bc=bc)
print("one pair, widths 0.1 -> 0.00625:")
print(f"  coarse stop after {pair.coarse.steps} steps at {np.round(pair.coarse.stop_point, 4)}")
print(f"  fine   stop after {pair.fine.steps} steps at {np.round(pair.fine.stop_point, 4)}")
print(f"  boundary values {pair.coarse.value:.4f} / {pair.fine.value:.4f}, diff {pair.diff:+.4f}")

batch = run_many(domain, problem.start, [0.1, 0.1 / 16], master_seed=42, count=20_000)
coarse_vals = bc(batch.exits[0])
fine_vals = bc(batch.exits[1])
print("\n20000 pairs:")
print(f"  var fine value     : {np.var(fine_vals):.5f}")
print(f"  var coupled diff   : {np.var(fine_vals - coarse_vals):.5f}")
print(f"  variance reduction : {np.var(fine_vals) / np.var(fine_vals - coarse_vals):.1f}x")
