# %% [markdown]
# # Truncation residuals
#
# Plugging the exact solution into the nonlocal model leaves a residual in
# the interior and one on the boundary. Fine quadrature lets us measure how
# fast each shrinks with delta.

# %%
import numpy as np

from nonlocal_poisson.geometry import disk_bump, disk_paraboloid, hemisphere_z2
from nonlocal_poisson.operators import (
    QuadratureGrid, boundary_residual_l2, decay_slope, interior_probes, interior_residual_rms,
)

deltas = (0.2, 0.1, 0.05)

# %%
for problem in (hemisphere_z2(), disk_bump(), disk_paraboloid()):
    grid = QuadratureGrid(problem.manifold, 300)
    probes = interior_probes(problem.manifold, 0.5)
    rin = [interior_residual_rms(problem, d, grid, probes) for d in deltas]
    rbd = [boundary_residual_l2(problem, d, grid, 32) for d in deltas]
    print(problem.manifold.name, problem.name)
    print("  interior", np.array(rin), "slopes",
          [round(decay_slope(rin[i], rin[i + 1], deltas[i], deltas[i + 1]), 2) for i in range(2)])
    print("  boundary", np.array(rbd), "slopes",
          [round(decay_slope(rbd[i], rbd[i + 1], deltas[i], deltas[i + 1]), 2) for i in range(2)])

# %% [markdown]
# The quadratic on the flat disk has no interior residual at all. The
# hemisphere data have zero flux, so its boundary residual falls one order
# faster than the disk's.
