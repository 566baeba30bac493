"""
The bit-string optimiser on its own
===================================

The parent/bud loop works with any objective over fixed-length bit
strings. OneMax counts the ones.
"""

import numpy as np

from arofraud.aro_core import AroCoreParams, merge_probability, optimize

for lam in (1, 2, 4, 8):
    print(f"window {lam}: larva gene taken with probability {merge_probability(lam):.3f}")

res = optimize(AroCoreParams(length=8, objective=lambda x: float(x.sum()), max_iterations=2000,
                             seed=0, target_fitness=8))
print("best", res.best.astype(int), "fitness", res.best_fitness, "after", res.iterations_used, "buds")

# success rate over many seeds
found = [optimize(AroCoreParams(8, lambda x: float(x.sum()), 2000, seed=s, target_fitness=8)).best_fitness == 8
         for s in range(100)]
print("optimum reached for", int(np.sum(found)), "of 100 seeds")

# a different objective: match a hidden pattern
target = np.array([1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0], dtype=bool)
res = optimize(AroCoreParams(12, lambda x: -float(np.sum(x != target)), 5000, seed=1, target_fitness=0))
print("pattern recovered:", bool(np.array_equal(res.best, target)), "in", res.iterations_used, "buds")
