"""
Searching a bumpy landscape
===========================

Seven random Gaussian bumps on a 61 x 61 grid.  Nested entropy sampling
climbs towards the highest bump while touching only a fraction of the
cells; brute force touches all of them.
"""

from nestedentropy import (GridSpace, NesConfig, brute_force_map,
                           random_landscape, run_nes)

grid = GridSpace.square(61)
landscape = random_landscape(7, grid, rng_seed=3)

# the reference answer: every cell evaluated once
truth = brute_force_map(landscape, grid)
print("brute force:", truth.argmax_cells, f"{truth.max_value:.4f}",
      "evaluations", truth.evaluations)

# 50 live samples, 20 walk steps per replacement
result = run_nes(landscape, grid, NesConfig(num_samples=50, seed=1))
m = result.metrics
print("NES:        ", result.optimal_cells, f"{result.h_max:.4f}",
      "evaluations", m.evaluations)
print(f"compression efficiency {m.compression_efficiency:.2f} "
      f"after {m.iterations} iterations")

# the threshold only ever rises
h = result.threshold_history
print("threshold at 0%, 50%, 100% of the run:",
      [round(h[int(q * (len(h) - 1))], 4) for q in (0, 0.5, 1)])

# a crude text map of which cells were evaluated
seen = set(result.visited)
for i in range(0, 61, 3):
    print("".join("#" if (i, j) in seen else "." for j in range(0, 61, 2)))
