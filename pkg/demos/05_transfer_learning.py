"""Transfer tuning knowledge from a small problem to a larger one.

The source session tunes a cheap 800-row instance; the transfer session on
the 4000-row target then starts from the source's best configuration and
mixes a UCB bandit over the six (algorithm, operator) cells with a
multitask GP over the ordinal parameters.
"""

from sketchtune import ConstantParams, TuningSpace, generate_problem, random_search, tla_tune, tune

space = TuningSpace()
constants = ConstantParams(num_repeats=3, num_pilots=5)

source_problem = generate_problem("GA", 800, 100, seed=20)
target_problem = generate_problem("GA", 4000, 100, seed=21)

_, source_history = random_search(source_problem, space, constants, budget=40, seed=22)
src_best = min(source_history, key=lambda r: r.objective_value)
print(f"source best ({source_problem.m} rows): {src_best.objective_value:.4f}s "
      f"{src_best.config.astuple()}")

budget = 18
best_tla, hist_tla = tla_tune(target_problem, source_history, space, constants, budget, seed=23)
best_gp, hist_gp = tune(target_problem, space, constants, budget, seed=23)

print(f"\ntarget ({target_problem.m} rows), budget {budget}:")
print(f"  transfer (UCB+LCM) best: {best_tla.objective_value:.4f}s {best_tla.config.astuple()}")
print(f"  plain GP tuner best:     {best_gp.objective_value:.4f}s {best_gp.config.astuple()}")
print(f"\nfirst transfer evaluations: reference, then the source best:")
for r in hist_tla[:3]:
    print(f"  {r.config.astuple()} -> {r.objective_value:.4f}s")
