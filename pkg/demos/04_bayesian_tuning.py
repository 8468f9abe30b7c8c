"""Tune the solver with the GP surrogate against the random-search baseline.

Both sessions share the harness: reference evaluation first (fixing the
accuracy allowance), then either pure LHS draws or pilot draws followed by
Expected-Improvement acquisitions.  Inaccurate configurations get their
wall clock doubled, which the log-space GP learns to avoid.
"""

import numpy as np

from sketchtune import ConstantParams, TuningSpace, random_search, tune

problem_args = ("GA", 3000, 100, 5)
space = TuningSpace()
constants = ConstantParams(num_repeats=3)
budget = 20

from sketchtune import generate_problem

problem = generate_problem(*problem_args)

best_rand, hist_rand = random_search(problem, space, constants, budget, seed=1)
best_gp, hist_gp = tune(problem, space, constants, budget, seed=1)

print(f"reference config time: {hist_gp[0].objective_value:.4f}s")


def running_best(records):
    out, cur = [], np.inf
    for r in records:
        cur = min(cur, r.objective_value)
        out.append(cur)
    return out


print(f"\n{'eval':>4} {'random best':>12} {'GP best':>12}")
rb, gb = running_best(hist_rand), running_best(hist_gp)
for i in range(0, budget, 3):
    print(f"{i + 1:>4} {rb[i]:>12.4f} {gb[i]:>12.4f}")

print(f"\nrandom search best: {best_rand.objective_value:.4f}s {best_rand.config.astuple()}")
print(f"GP tuner best:      {best_gp.objective_value:.4f}s {best_gp.config.astuple()}")
